use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use aitken_jungck::aitken::{self, AitkenWindow, DEFAULT_FLOOR};
use aitken_jungck::diagnostics::{acceleration_ratio, sequences_equivalent};
use aitken_jungck::engine::{self, JungckConfig, PowerMode};
use aitken_jungck::model::{GatePolicy, Operator, OperatorPair, Schedule, ScheduleForm, StateVector};
use aitken_jungck::stability::{self, StabilityOptions};
use aitken_jungck::venter::{self, VenterConfig};

fn matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d).prop_map(move |v| DMatrix::from_vec(d, d, v))
}

/// Diagonally dominant, so comfortably invertible.
fn s_matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (matrix(d), 1.5..3.0f64).prop_map(move |(m, shift)| m + DMatrix::identity(d, d) * (shift * d as f64))
}

fn vector(d: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-2.0..2.0f64, d).prop_map(|v| StateVector::new(v).unwrap())
}

fn schedule() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        (0.0..=1.0f64).prop_map(ScheduleForm::Constant),
        (1.0..5.0f64).prop_map(|k| ScheduleForm::OneMinusInverse { k }),
        (1.0..5.0f64).prop_map(|k| ScheduleForm::Inverse { k }),
        (1.0..5.0f64, 0.5..3.0f64).prop_map(|(k, p)| ScheduleForm::InversePower { k, p }),
    ]
    .prop_map(|f| Schedule::unit(f).unwrap())
}

fn config(d: usize, steps: usize) -> impl Strategy<Value = JungckConfig> {
    (s_matrix(d), matrix(d), 0.05..0.95f64, schedule(), schedule(), vector(d)).prop_map(move |(s, t, tn, a, b, z0)| {
        let norm = t.clone().svd(false, false).singular_values.max();
        let t = if norm > 0.0 { t * (tn / norm) } else { t };
        let pair = OperatorPair::new(Operator::Linear(s), Operator::Linear(t), 1e-12).unwrap();
        JungckConfig::new(pair, a, b, z0, steps)
    })
}

/// Largest singular value by power iteration on `MᵀM`.
fn power_norm(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let mut v = DVector::from_element(m.ncols(), 1.0);
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = &g * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w) / v.dot(&v);
        v = w / n;
    }
    lambda.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_inverts_s(s in s_matrix(4), v in vector(4)) {
        let pair = OperatorPair::new(Operator::Linear(s.clone()), Operator::identity(4), 1e-12).unwrap();
        let x = pair.solve(&v).unwrap();
        let back = &s * x.as_dvector();
        prop_assert!((back - v.as_dvector()).norm() <= 1e-10 * (1.0 + v.norm()));
    }

    #[test]
    fn norms_match_power_iteration(s in s_matrix(4), x in vector(4)) {
        let pair = OperatorPair::new(Operator::Linear(s.clone()), Operator::identity(4), 1e-12).unwrap();
        let inv = s.clone().try_inverse().unwrap();
        let mu_oracle = 1.0 / power_norm(&inv);
        let mu = pair.s_min_modulus().unwrap();
        prop_assert!((mu - mu_oracle).abs() <= 1e-6 * mu_oracle, "{mu} vs {mu_oracle}");
        prop_assert!((pair.s_norm().unwrap() - power_norm(&s)).abs() <= 1e-6 * power_norm(&s));
        let sx = (&s * x.as_dvector()).norm();
        prop_assert!(mu * x.norm() <= sx * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn schedules_are_pure_and_clamped(s in schedule(), n in 0usize..10_000) {
        let v = s.eval(n).unwrap();
        prop_assert_eq!(v.to_bits(), s.eval(n).unwrap().to_bits());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn aitken_recovers_geometric_limit(l in -10.0..10.0f64, c in 0.1..5.0f64, r in 0.1..0.9f64, neg in any::<bool>()) {
        let r = if neg { -r } else { r };
        let xs: Vec<f64> = (0..12).map(|n| l + c * r.powi(n)).collect();
        let acc = aitken::accelerate_scalars(&xs, &GatePolicy::AlwaysOn, DEFAULT_FLOOR).unwrap();
        for a in acc {
            prop_assert!((a - l).abs() <= 1e-10 * (1.0 + l.abs()));
        }
    }

    #[test]
    fn gated_off_terms_pass_through(s0 in vector(3), s1 in vector(3), s2 in vector(3), req in prop::collection::vec(any::<bool>(), 3)) {
        let w = AitkenWindow::new(s0.clone(), s1, s2, &req, DEFAULT_FLOOR).unwrap();
        let out = aitken::aitken_correct(&w);
        for i in 0..3 {
            prop_assert!(out[i].is_finite());
            if !w.gate()[i] {
                prop_assert_eq!(out[i].to_bits(), s0[i].to_bits());
            }
            if !req[i] {
                prop_assert!(!w.gate()[i]);
            }
        }
    }

    #[test]
    fn power_modes_agree(cfg in config(3, 30)) {
        let cached = engine::run(&JungckConfig { power_mode: PowerMode::MatrixCached, ..cfg.clone() }).unwrap();
        let repeated = engine::run(&JungckConfig { power_mode: PowerMode::RepeatedApply, ..cfg }).unwrap();
        for (a, b) in cached.rows.iter().zip(&repeated.rows) {
            prop_assert!(a.z.distance(&b.z) <= 1e-10 * (1.0 + a.z.norm()));
        }
    }

    #[test]
    fn identity_holds_to_rounding(cfg in config(4, 60)) {
        let trace = engine::run(&cfg).unwrap();
        prop_assert!(engine::max_relative_identity_residual(&trace) <= 1e-12);
    }

    #[test]
    fn zero_is_fixed(cfg in config(3, 20)) {
        let cfg = JungckConfig { z0: StateVector::zeros(3), ..cfg };
        let trace = engine::run(&cfg).unwrap();
        for r in &trace.rows {
            prop_assert_eq!(r.z.norm(), 0.0);
            prop_assert_eq!(r.y.norm(), 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic(cfg in config(3, 25)) {
        let a = engine::run(&cfg).unwrap();
        let b = engine::run(&cfg).unwrap();
        prop_assert_eq!(a.rows, b.rows);
        prop_assert_eq!(a.accel_z, b.accel_z);
    }

    #[test]
    fn shrinking_t_never_loses_certificates(cfg in config(3, 10), c in 0.1..1.0f64) {
        let opts = StabilityOptions { horizon: 50, tail_start: 0, tail_tol: 0.01 };
        let t = cfg.pair.t().matrix().unwrap() * c;
        let small_pair = OperatorPair::new(cfg.pair.s().clone(), Operator::Linear(t), 1e-12).unwrap();
        let small = JungckConfig { pair: small_pair, ..cfg.clone() };
        let big = stability::assess(&cfg, &opts).unwrap();
        let little = stability::assess(&small, &opts).unwrap();
        for (b, l) in big.certificates().iter().zip(little.certificates()) {
            prop_assert!(l.margin >= b.margin - 1e-12, "{:?}: {} < {}", b.property, l.margin, b.margin);
            prop_assert!(!b.applies || l.applies);
        }
    }

    #[test]
    fn venter_is_monotone_in_start(x0 in 0.0..5.0f64, dx in 0.0..5.0f64, alpha in 0.01..1.0f64, gamma in 0.0..0.5f64, omega in 0.0..0.1f64, sigma in 0.0..0.1f64) {
        let mk = |x0| {
            let cfg = VenterConfig::new(
                Schedule::nonnegative(ScheduleForm::Constant(alpha)).unwrap(),
                Schedule::nonnegative(ScheduleForm::Constant(gamma)).unwrap(),
                Schedule::nonnegative(ScheduleForm::Constant(omega)).unwrap(),
                sigma,
                x0,
                100,
            ).unwrap();
            venter::venter_run(&cfg).unwrap().x
        };
        let lo = mk(x0);
        let hi = mk(x0 + dx);
        for (l, h) in lo.iter().zip(&hi) {
            prop_assert!(*l >= 0.0);
            prop_assert!(l <= h);
        }
    }

    #[test]
    fn ratio_is_scale_invariant(l in -5.0..5.0f64, c in 0.5..2.0f64, r in 0.2..0.8f64, j in -20i32..20) {
        // power-of-two scaling is exact, so the ratios must not move at all
        let k = 2f64.powi(j);
        let raw: Vec<f64> = (0..15).map(|n| l + c * r.powi(n) + 0.3 * (r / 2.0).powi(n)).collect();
        let acc = aitken::accelerate_scalars(&raw, &GatePolicy::AlwaysOn, DEFAULT_FLOOR).unwrap();
        let sv = |xs: &[f64], s: f64| xs.iter().map(|x| StateVector::scalar(x * s).unwrap()).collect::<Vec<_>>();
        let lim = |s: f64| StateVector::scalar(l * s).unwrap();
        let base = acceleration_ratio(&sv(&raw, 1.0), &sv(&acc, 1.0), &lim(1.0)).unwrap();
        let scaled = acceleration_ratio(&sv(&raw, k), &sv(&acc, k), &lim(k)).unwrap();
        prop_assert_eq!(base.len(), scaled.len());
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
        }
    }

    #[test]
    fn equivalence_is_symmetric(l1 in -3.0..3.0f64, l2 in -3.0..3.0f64, r in 0.1..0.9f64) {
        let a: Vec<StateVector> = (0..40).map(|n| StateVector::scalar(l1 + r.powi(n)).unwrap()).collect();
        let b: Vec<StateVector> = (0..40).map(|n| StateVector::scalar(l2 - r.powi(n)).unwrap()).collect();
        prop_assert_eq!(sequences_equivalent(&a, &b, 1e-6).unwrap(), sequences_equivalent(&b, &a, 1e-6).unwrap());
    }
}

/// Scalar iteration written out by hand: S = 2, T = 0.5, a = b = 1/2.
#[test]
fn scalar_run_matches_hand_recursion() {
    let pair = OperatorPair::new(
        Operator::scaled_identity(1, 2.0).unwrap(),
        Operator::scaled_identity(1, 0.5).unwrap(),
        1e-12,
    )
    .unwrap();
    let half = Schedule::constant(0.5).unwrap();
    let cfg = JungckConfig::new(pair, half.clone(), half, StateVector::scalar(1.0).unwrap(), 12);
    let trace = engine::run(&cfg).unwrap();

    let (s, t, a, b) = (2.0_f64, 0.5_f64, 0.5, 0.5);
    let mut z = 1.0_f64;
    for (n, row) in trace.rows.iter().enumerate() {
        let tn = t.powi(n as i32);
        let sy = (1.0 - b) * s * z + b * tn * z;
        let y = sy / s;
        assert!((row.z[0] - z).abs() <= 1e-15 * (1.0 + z.abs()), "z_{n}");
        assert!((row.y[0] - y).abs() <= 1e-15 * (1.0 + y.abs()), "y_{n}");
        let sz_next = (1.0 - a) * tn * z + a * tn * y;
        z = sz_next / s;
    }
    assert_eq!(trace.rows[1].sz[0], 0.875);
    assert_eq!(trace.rows[2].sz[0], 0.177734375);
}
