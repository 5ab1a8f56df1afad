//! Sufficient conditions for boundedness and convergence of the iteration
//! with linear operators.
//!
//! The conditions are stated with `limsup` and limits over the schedules.
//! Here they are replaced by finite-horizon surrogates: suprema over
//! `[n0, H]` and tail checks over `[H/2, H]`. Every verdict is therefore
//! empirical at horizon `H`; it is exact for constant schedules and for the
//! eventually monotone formula families.

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::engine::JungckConfig;
use crate::model::{spectral_norm, ModelError, Schedule, ScheduleForm};
use crate::trace::IterationTrace;

/// Slack allowed when comparing an inequality's two sides.
pub const CERT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StabilityError {
    #[error("operator norms unavailable for non-matrix operators")]
    NormsUnavailable,
    #[error("horizon {horizon} must be at least tail start {tail_start} + 10")]
    InvalidHorizon { horizon: usize, tail_start: usize },
    #[error("non-finite operator power norm at n = {0}")]
    NonFinitePower(usize),
    #[error("schedule evaluation failed: {0}")]
    Schedule(#[from] ModelError),
    #[error("trace does not match the certified configuration: {0}")]
    TraceMismatch(String),
}

/// Empirical suprema standing in for the `limsup` constants.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConstants {
    /// `sup |a_n| ‖T^n‖`
    pub k1: f64,
    /// `sup |b_n| ‖T^n‖`
    pub k2: f64,
    /// `sup |1 - a_n| ‖T^n‖`
    pub k1p: f64,
    /// `sup |1 - b_n|`
    pub k2p: f64,
    /// `sup_{n ≤ H} μ⁻¹(S) (|1 - b_n| ‖S‖ + |b_n|)`
    pub m: f64,
    pub horizon: usize,
    pub tail_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Property {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::I => "(i)",
            Property::II => "(ii)",
            Property::III => "(iii)",
            Property::IV => "(iv)",
            Property::V => "(v)",
        })
    }
}

/// Outcome of one sufficient condition.
///
/// `margin` is the smallest slack over the inequalities involved; the
/// property applies iff `margin >= -CERT_SLACK`, except for the strict
/// `‖T‖ < 1` hypotheses of (iv) and (v), which need `1 - ‖T‖ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub property: Property,
    pub applies: bool,
    pub margin: f64,
    pub constants: Vec<(&'static str, f64)>,
}

/// Property (i) together with its simpler sufficient pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyICheck {
    pub full: Certificate,
    /// `k2' + μ⁻¹ k2 ≤ 1` and `μ⁻¹ (k1' + k1) ≤ 1`.
    pub simple_pair_applies: bool,
    pub simple_pair_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Bounded,
    ConvergesToZero,
    NoCertificate,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prediction::Bounded => "bounded",
            Prediction::ConvergesToZero => "converges-to-zero",
            Prediction::NoCertificate => "no-certificate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityOptions {
    pub horizon: usize,
    pub tail_start: usize,
    /// Distance to 1 tolerated on the tail when a schedule must tend to 1.
    pub tail_tol: f64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { horizon: 1000, tail_start: 0, tail_tol: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub constants: StabilityConstants,
    pub mu_s: f64,
    pub t_norm: f64,
    pub property_i: PropertyICheck,
    pub property_ii: Certificate,
    pub property_iii: Certificate,
    pub property_iv: Certificate,
    pub property_v: Certificate,
    pub predicted: Prediction,
    pub simulation_agrees: Option<bool>,
    /// Human-readable outcome of each cross-validation check.
    pub validation_notes: Vec<String>,
    pub dim: usize,
}

impl StabilityReport {
    pub fn certificates(&self) -> [&Certificate; 5] {
        [&self.property_i.full, &self.property_ii, &self.property_iii, &self.property_iv, &self.property_v]
    }

    pub fn bounded_certified(&self) -> bool {
        self.property_i.full.applies || self.property_ii.applies || self.property_iii.applies
    }

    pub fn zero_certified(&self) -> bool {
        self.property_iv.applies || self.property_v.applies
    }
}

fn linear_parts(cfg: &JungckConfig) -> Result<(&DMatrix<f64>, f64, f64, f64), StabilityError> {
    let pair = &cfg.pair;
    match (pair.t().matrix(), pair.t_norm(), pair.s_norm(), pair.s_min_modulus()) {
        (Some(t), Some(tn), Some(sn), Some(mu)) => Ok((t, tn, sn, mu)),
        _ => Err(StabilityError::NormsUnavailable),
    }
}

/// `‖T^n‖` for `n = 0..=horizon`.
pub fn power_norms(t: &DMatrix<f64>, horizon: usize) -> Result<Vec<f64>, StabilityError> {
    let d = t.nrows();
    let mut out = Vec::with_capacity(horizon + 1);
    let mut p = DMatrix::<f64>::identity(d, d);
    out.push(1.0);
    for n in 1..=horizon {
        p = t * p;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(StabilityError::NonFinitePower(n));
        }
        let norm = spectral_norm(&p);
        out.push(norm);
        if norm == 0.0 {
            out.resize(horizon + 1, 0.0);
            break;
        }
    }
    Ok(out)
}

fn m_term(mu: f64, s_norm: f64, b: f64) -> f64 {
    ((1.0 - b).abs() * s_norm + b.abs()) / mu
}

pub fn compute_constants(cfg: &JungckConfig, horizon: usize, tail_start: usize) -> Result<StabilityConstants, StabilityError> {
    let (t, _, s_norm, mu) = linear_parts(cfg)?;
    if horizon < tail_start + 10 {
        return Err(StabilityError::InvalidHorizon { horizon, tail_start });
    }
    let norms = power_norms(t, horizon)?;
    let mut c = StabilityConstants { k1: 0.0, k2: 0.0, k1p: 0.0, k2p: 0.0, m: 0.0, horizon, tail_start };
    for (n, &tn) in norms.iter().enumerate() {
        let a = cfg.a.eval(n)?;
        let b = cfg.b.eval(n)?;
        c.m = c.m.max(m_term(mu, s_norm, b));
        if n < tail_start {
            continue;
        }
        c.k1 = c.k1.max(a.abs() * tn);
        c.k2 = c.k2.max(b.abs() * tn);
        c.k1p = c.k1p.max((1.0 - a).abs() * tn);
        c.k2p = c.k2p.max((1.0 - b).abs());
    }
    Ok(c)
}

/// Property (i): `k2' + μ⁻¹k2 ≤ 1` and `μ⁻¹[k1' + k1(k2' + k2 μ⁻¹)] ≤ 1`.
pub fn check_property_i(c: &StabilityConstants, mu_s: f64) -> PropertyICheck {
    let inv = 1.0 / mu_s;
    let y_gain = c.k2p + inv * c.k2;
    let z_gain = inv * (c.k1p + c.k1 * (c.k2p + c.k2 * inv));
    let margin = (1.0 - y_gain).min(1.0 - z_gain);
    let simple_margin = (1.0 - y_gain).min(1.0 - inv * (c.k1p + c.k1));
    PropertyICheck {
        full: Certificate {
            property: Property::I,
            applies: margin >= -CERT_SLACK,
            margin,
            constants: vec![("k1", c.k1), ("k2", c.k2), ("k1p", c.k1p), ("k2p", c.k2p), ("mu_s", mu_s)],
        },
        simple_pair_applies: simple_margin >= -CERT_SLACK,
        simple_pair_margin: simple_margin,
    }
}

/// Properties (ii) and (iii), which need `‖T‖ ≤ 1` and conditions on every
/// `n ∈ [0, H]`.
pub fn check_property_ii_iii(cfg: &JungckConfig, horizon: usize) -> Result<(Certificate, Certificate), StabilityError> {
    let (_, t_norm, s_norm, mu) = linear_parts(cfg)?;
    let ab = (0..=horizon)
        .map(|n| Ok((cfg.a.eval(n)?, cfg.b.eval(n)?)))
        .collect::<Result<Vec<_>, ModelError>>()?;
    let m = ab.iter().map(|&(_, b)| m_term(mu, s_norm, b)).fold(0.0, f64::max);

    let t_slack = 1.0 - t_norm;
    let ii_slack = ab
        .iter()
        .map(|&(a, b)| 1.0 - ((1.0 - a).abs() + a.abs() * m_term(mu, s_norm, b)) / mu)
        .fold(f64::INFINITY, f64::min);
    let iii_slack = ab
        .iter()
        .map(|&(a, _)| mu - ((1.0 - a).abs() + a.abs() * m))
        .fold(f64::INFINITY, f64::min);

    let ii_margin = t_slack.min(ii_slack);
    let iii_margin = t_slack.min(iii_slack);
    let constants = vec![("t_norm", t_norm), ("s_norm", s_norm), ("mu_s", mu), ("M", m)];
    Ok((
        Certificate { property: Property::II, applies: ii_margin >= -CERT_SLACK, margin: ii_margin, constants: constants.clone() },
        Certificate { property: Property::III, applies: iii_margin >= -CERT_SLACK, margin: iii_margin, constants },
    ))
}

fn tail_distance_to_one(s: &Schedule, horizon: usize) -> Result<f64, ModelError> {
    (horizon / 2..=horizon).try_fold(0.0_f64, |acc, n| Ok(acc.max((s.eval(n)? - 1.0).abs())))
}

/// Properties (iv) (`a_n → 1`) and (v) (`b_n → 1`), both with `‖T‖ < 1`.
pub fn check_property_iv_v(cfg: &JungckConfig, horizon: usize, tol: f64) -> Result<(Certificate, Certificate), StabilityError> {
    let (_, t_norm, _, _) = linear_parts(cfg)?;
    let t_slack = 1.0 - t_norm;
    let cert = |property, sched: &Schedule| -> Result<Certificate, StabilityError> {
        let dist = tail_distance_to_one(sched, horizon)?;
        let margin = t_slack.min(tol - dist);
        Ok(Certificate {
            property,
            applies: t_slack > 0.0 && dist <= tol,
            margin,
            constants: vec![("t_norm", t_norm), ("tail_distance", dist), ("tol", tol)],
        })
    };
    Ok((cert(Property::IV, &cfg.a)?, cert(Property::V, &cfg.b)?))
}

/// Evaluates every property for `cfg`.
pub fn assess(cfg: &JungckConfig, opts: &StabilityOptions) -> Result<StabilityReport, StabilityError> {
    let (_, t_norm, _, mu_s) = linear_parts(cfg)?;
    let constants = compute_constants(cfg, opts.horizon, opts.tail_start)?;
    let property_i = check_property_i(&constants, mu_s);
    let (property_ii, property_iii) = check_property_ii_iii(cfg, opts.horizon)?;
    let (property_iv, property_v) = check_property_iv_v(cfg, opts.horizon, opts.tail_tol)?;
    let mut report = StabilityReport {
        constants,
        mu_s,
        t_norm,
        property_i,
        property_ii,
        property_iii,
        property_iv,
        property_v,
        predicted: Prediction::NoCertificate,
        simulation_agrees: None,
        validation_notes: Vec::new(),
        dim: cfg.pair.dim(),
    };
    report.predicted = if report.zero_certified() {
        Prediction::ConvergesToZero
    } else if report.bounded_certified() {
        Prediction::Bounded
    } else {
        Prediction::NoCertificate
    };
    Ok(report)
}

/// Largest one-step growth `‖z_{n+1}‖ / ‖z_n‖` over the trace (zero iterates skipped).
pub fn max_growth(trace: &IterationTrace) -> f64 {
    trace
        .rows
        .windows(2)
        .filter(|w| w[0].z.norm() > 0.0)
        .map(|w| w[1].z.norm() / w[0].z.norm())
        .fold(0.0, f64::max)
}

/// Compares the certified behaviour with a simulated trace of the same
/// configuration and records the outcome in `simulation_agrees`.
///
/// Nothing is claimed when no property applies, since the conditions are
/// sufficient only.
pub fn cross_validate(report: &StabilityReport, trace: &IterationTrace) -> Result<StabilityReport, StabilityError> {
    if trace.dim() != report.dim {
        return Err(StabilityError::TraceMismatch(format!(
            "trace dimension {} vs report dimension {}",
            trace.dim(),
            report.dim
        )));
    }
    if trace.is_empty() {
        return Err(StabilityError::TraceMismatch("trace is empty".into()));
    }
    let mut out = report.clone();
    out.validation_notes.clear();
    if !report.bounded_certified() && !report.zero_certified() {
        out.simulation_agrees = None;
        return Ok(out);
    }

    let c = &report.constants;
    let rows = &trace.rows;
    let last = rows.len() - 1;
    let mut agrees = true;
    let mut note = |ok: bool, msg: String| {
        agrees &= ok;
        out.validation_notes.push(format!("{} {msg}", if ok { "ok" } else { "violated" }));
    };

    if trace.diverged() {
        note(false, "run halted before completion".into());
    }

    let bounded_check = |anchor: usize, upto: usize| -> Option<(f64, f64)> {
        if anchor > upto {
            return None;
        }
        let base = rows[anchor].z.norm();
        let sup = rows[anchor..=upto].iter().map(|r| r.z.norm()).fold(0.0, f64::max);
        Some((sup, base))
    };

    if report.property_i.full.applies {
        let anchor = c.tail_start.max(1);
        let upto = last.min(c.horizon);
        if let Some((sup, base)) = bounded_check(anchor, upto) {
            note(sup <= base * (1.0 + 1e-6), format!("(i) sup ||z_n|| = {sup:e} <= ||z_{anchor}|| = {base:e}"));
        }
        let gain = c.k2p + c.k2 / report.mu_s + 1e-6;
        let worst = rows[c.tail_start.min(last)..=upto.max(c.tail_start.min(last))]
            .iter()
            .map(|r| r.y.norm() - gain * r.z.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        note(worst <= 0.0, format!("(i) ||y_n|| <= {gain:.6} ||z_n||"));
    }
    if report.property_ii.applies || report.property_iii.applies {
        let upto = last.min(c.horizon);
        if let Some((sup, base)) = bounded_check(1, upto) {
            note(sup <= base * (1.0 + 1e-6), format!("(ii)/(iii) sup ||z_n|| = {sup:e} <= ||z_1|| = {base:e}"));
        }
        let gain = c.m + 1e-6;
        let worst = rows[..=upto]
            .iter()
            .map(|r| r.y.norm() - gain * r.z.norm())
            .fold(f64::NEG_INFINITY, f64::max);
        note(worst <= 0.0, format!("(ii)/(iii) ||y_n|| <= M ||z_n||, M = {:.6}", c.m));
    }
    if report.zero_certified() {
        let z0 = rows[0].z.norm();
        let zn = rows[last].z.norm();
        note(zn <= 1e-6 * z0, format!("(iv)/(v) ||z_N|| = {zn:e} vs 1e-6 ||z_0|| = {:e}", 1e-6 * z0));
    }
    out.simulation_agrees = Some(agrees);
    Ok(out)
}

/// Checkable parts of the positivity and global-stability constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalStabilityReport {
    /// `b_n ∈ (0, 1]` on `[0, H]`.
    pub b_in_range: bool,
    /// `|b_n - 1| ≤ tol` on `[H/2, H]`.
    pub b_tends_to_one: bool,
    /// `a_n ∈ [0, 1]` on `[0, H]`.
    pub a_in_range: bool,
    /// 0 or 1 when the tail of `a` sits within `tol` of it.
    pub a_tail_limit: Option<f64>,
    pub s_inverse_nonnegative: bool,
    pub t_nonnegative: bool,
    /// Empirical ratios `(n, ‖T^n‖/‖y_n‖, ‖T^n‖/‖z_n‖)`, reported without a verdict.
    pub little_o_ratios: Vec<(usize, f64, f64)>,
    /// Free-text diagnostics (coupled schedule identity and related notes).
    pub diagnostics: Vec<String>,
}

impl GlobalStabilityReport {
    pub fn b_condition(&self) -> bool {
        self.b_in_range && self.b_tends_to_one
    }

    pub fn a_condition(&self) -> bool {
        self.a_in_range && self.a_tail_limit.is_some()
    }

    pub fn positivity(&self) -> bool {
        self.s_inverse_nonnegative && self.t_nonnegative
    }

    pub fn holds(&self) -> bool {
        self.b_condition() && self.a_condition() && self.positivity()
    }
}

/// Builds `γ_n = (2 - α_n) / b_n` for `n < len` as a nonnegative list schedule.
pub fn coupled_gamma(alpha: &Schedule, b: &Schedule, len: usize) -> Result<Schedule, ModelError> {
    let vals = (0..len)
        .map(|n| {
            let bn = b.eval(n)?;
            if bn <= 0.0 {
                return Err(ModelError::InvalidScheduleParameter(format!("b_{n} = {bn} must be positive")));
            }
            Ok((2.0 - alpha.eval(n)?) / bn)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Schedule::nonnegative(ScheduleForm::List(vals))
}

pub fn check_global_stability(
    cfg: &JungckConfig,
    horizon: usize,
    tol: f64,
    trace: Option<&IterationTrace>,
    alpha: Option<&Schedule>,
) -> Result<GlobalStabilityReport, StabilityError> {
    let (t, _, _, _) = linear_parts(cfg)?;
    let s_inv = cfg.pair.s_inverse().ok_or(StabilityError::NormsUnavailable)?;

    let a = cfg.a.values(horizon + 1)?;
    let b = cfg.b.values(horizon + 1)?;
    let tail = horizon / 2..=horizon;
    let b_in_range = b.iter().all(|&v| v > 0.0 && v <= 1.0);
    let b_tends_to_one = tail.clone().all(|n| (b[n] - 1.0).abs() <= tol);
    let a_in_range = a.iter().all(|&v| (0.0..=1.0).contains(&v));
    let a_tail_limit = [0.0, 1.0]
        .into_iter()
        .find(|&lim| tail.clone().all(|n| (a[n] - lim).abs() <= tol));

    let scale = s_inv.amax();
    let s_inverse_nonnegative = s_inv.iter().all(|&v| v >= -1e-12 * scale);
    let t_nonnegative = t.iter().all(|&v| v >= 0.0);

    let mut little_o_ratios = Vec::new();
    if let Some(trace) = trace {
        let upto = trace.len().min(horizon + 1);
        let norms = power_norms(t, upto.saturating_sub(1))?;
        for r in &trace.rows[..upto] {
            little_o_ratios.push((r.n, norms[r.n] / r.y.norm(), norms[r.n] / r.z.norm()));
        }
    }

    let mut diagnostics = vec![
        "positivity of every S^-1 T^n certified through S^-1 >= 0 and T >= 0 entrywise".to_string(),
        "the coupled schedule condition needs sum alpha_n < inf, while the Venter recursion's divergence hypothesis needs sum alpha_n = inf; the two are reported, not reconciled".to_string(),
    ];
    if let Some(alpha) = alpha {
        let gamma = coupled_gamma(alpha, &cfg.b, horizon + 1)?;
        let mut sum_alpha = 0.0;
        let mut sum_defect = 0.0;
        for n in 0..=horizon {
            sum_alpha += alpha.eval(n)?;
            sum_defect += 2.0 - b[n] * gamma.eval(n)?;
        }
        diagnostics.push(format!(
            "coupled schedule at H = {horizon}: sum alpha = {sum_alpha:e}, sum (2 - b_n gamma_n) = {sum_defect:e}, alpha series {}",
            alpha.series_behavior()
        ));
    }

    Ok(GlobalStabilityReport {
        b_in_range,
        b_tends_to_one,
        a_in_range,
        a_tail_limit,
        s_inverse_nonnegative,
        t_nonnegative,
        little_o_ratios,
        diagnostics,
    })
}
