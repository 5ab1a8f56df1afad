//! Seeded random linear configurations and the stability soundness scan.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{self, JungckConfig};
use crate::model::{min_singular_value, spectral_norm, Operator, OperatorPair, Schedule, ScheduleForm, StateVector};
use crate::stability::{self, Prediction, StabilityOptions};

/// Relative growth tolerated between consecutive iterates of a certified run.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Final `‖z_N‖ / ‖z_0‖` required of runs certified to converge to zero.
pub const ZERO_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub count: usize,
    pub seed: u64,
    pub dim: usize,
    pub steps: usize,
    pub horizon: usize,
    pub t_norm_max: f64,
    pub s_min_modulus_min: f64,
    /// `μ(S)` is drawn uniformly from `[s_min_modulus_min, s_min_modulus_max]`.
    pub s_min_modulus_max: f64,
    /// Largest ratio `‖S‖ / μ(S)` drawn.
    pub s_condition_max: f64,
    pub tail_tol: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            count: 100,
            seed: 0,
            dim: 5,
            steps: 1000,
            horizon: 1000,
            t_norm_max: 0.9,
            s_min_modulus_min: 0.5,
            s_min_modulus_max: 3.0,
            s_condition_max: 2.0,
            tail_tol: 0.01,
        }
    }
}

/// RNG for config `index`, independent of the order configs are drawn in.
pub fn config_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// A schedule drawn from the built-in families, valued in `[0, 1]`.
pub fn random_schedule(rng: &mut impl Rng) -> Schedule {
    let form = match rng.random_range(0..6) {
        0 => ScheduleForm::Constant(rng.random_range(0.0..=1.0)),
        1 => ScheduleForm::Constant(1.0),
        2 => ScheduleForm::OneMinusInverse { k: rng.random_range(1.0..5.0) },
        3 => ScheduleForm::Inverse { k: rng.random_range(1.0..5.0) },
        4 => ScheduleForm::InversePower { k: rng.random_range(1.0..5.0), p: rng.random_range(1.0..3.0) },
        _ => ScheduleForm::Constant(rng.random_range(0.0..=1.0)),
    };
    Schedule::unit(form).expect("families stay in range")
}

/// Random `S` with singular values in `[μ, μ κ]` and random `T` with
/// `‖T‖ ≤ t_norm_max`.
pub fn random_pair(rng: &mut impl Rng, p: &ScanParams) -> OperatorPair {
    let d = p.dim;
    let mu = rng.random_range(p.s_min_modulus_min..=p.s_min_modulus_max.max(p.s_min_modulus_min));
    let kappa = rng.random_range(1.0..=p.s_condition_max.max(1.0));
    let sv: Vec<f64> = (0..d).map(|_| mu * rng.random_range(1.0..=kappa)).collect();
    let s = orthogonal(rng, d) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sv)) * orthogonal(rng, d).transpose();
    // guard the drawn spectrum against rounding
    let mu = min_singular_value(&s);
    let s = if mu < p.s_min_modulus_min {
        s * (p.s_min_modulus_min / mu)
    } else {
        s
    };
    let t = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let target = p.t_norm_max * rng.random_range(0.05..=1.0);
    let t = &t * (target / spectral_norm(&t));
    OperatorPair::new(Operator::Linear(s), Operator::Linear(t), 1e-12).expect("well-conditioned draw")
}

pub fn random_config(rng: &mut impl Rng, p: &ScanParams) -> JungckConfig {
    let pair = random_pair(rng, p);
    let a = random_schedule(rng);
    let b = random_schedule(rng);
    let z0 = StateVector::new((0..p.dim).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite");
    JungckConfig::new(pair, a, b, z0, p.steps)
}

/// Outcome for one random configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub index: usize,
    pub t_norm: f64,
    pub s_min_modulus: f64,
    pub s_norm: f64,
    pub applies: [bool; 5],
    pub predicted: Prediction,
    pub simulation_agrees: Option<bool>,
    pub max_growth: f64,
    /// `‖z_N‖ / ‖z_0‖`
    pub final_ratio: f64,
    pub max_identity_residual: f64,
    pub halted: bool,
    /// A certified property whose guarantee failed in simulation.
    pub soundness_violation: bool,
}

pub fn evaluate(index: usize, cfg: &JungckConfig, opts: &StabilityOptions) -> ScanEntry {
    let pair = &cfg.pair;
    let report = stability::assess(cfg, opts).ok();
    let trace = engine::run(cfg).expect("random configs validate");
    let max_growth = stability::max_growth(&trace);
    let z0 = trace.rows[0].z.norm();
    let final_ratio = trace.rows.last().map(|r| r.z.norm() / z0).unwrap_or(f64::NAN);
    let max_identity_residual = engine::max_relative_identity_residual(&trace);

    let (applies, predicted, simulation_agrees, violation) = match &report {
        Some(rep) => {
            let applies = [
                rep.property_i.full.applies,
                rep.property_ii.applies,
                rep.property_iii.applies,
                rep.property_iv.applies,
                rep.property_v.applies,
            ];
            let agrees = stability::cross_validate(rep, &trace).ok().and_then(|r| r.simulation_agrees);
            let mut violation = false;
            if rep.bounded_certified() {
                violation |= trace.diverged() || max_growth > 1.0 + MONOTONE_SLACK;
            }
            if rep.zero_certified() {
                violation |= trace.diverged() || !(final_ratio < ZERO_RATIO || z0 == 0.0);
            }
            (applies, rep.predicted, agrees, violation)
        }
        None => ([false; 5], Prediction::NoCertificate, None, false),
    };
    ScanEntry {
        index,
        t_norm: pair.t_norm().unwrap_or(f64::NAN),
        s_min_modulus: pair.s_min_modulus().unwrap_or(f64::NAN),
        s_norm: pair.s_norm().unwrap_or(f64::NAN),
        applies,
        predicted,
        simulation_agrees,
        max_growth,
        final_ratio,
        max_identity_residual,
        halted: trace.diverged(),
        soundness_violation: violation,
    }
}

/// Draws and evaluates `p.count` configurations in parallel. Results are
/// sorted by index, so the output does not depend on scheduling.
pub fn run_scan(p: &ScanParams) -> Vec<ScanEntry> {
    let opts = StabilityOptions { horizon: p.horizon, tail_start: 0, tail_tol: p.tail_tol };
    let mut out: Vec<ScanEntry> = (0..p.count)
        .into_par_iter()
        .map(|i| {
            let cfg = random_config(&mut config_rng(p.seed, i), p);
            evaluate(i, &cfg, &opts)
        })
        .collect();
    out.sort_by_key(|e| e.index);
    out
}
