//! Limit estimation, convergence rates and acceleration ratios.

use thiserror::Error;

use crate::aitken::{AitkenWindow, DEFAULT_FLOOR};
use crate::model::StateVector;
use crate::trace::IterationTrace;

/// Relative floor under which an error norm is treated as numerically zero.
pub const RATIO_FLOOR: f64 = 1e-13;

/// Relative size of the last difference below which a sequence counts as
/// numerically converged.
pub const CONVERGED_FLOOR: f64 = 1e-12;

const MIN_LEN: usize = 5;
const GROWTH_WINDOW: usize = 10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("sequence has {0} terms, need at least {MIN_LEN}")]
    TooShort(usize),
    #[error("sequence is not converging: differences grow over the last {0} steps")]
    NotConverging(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMethod {
    LastTerm,
    AitkenExtrapolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEstimate {
    pub value: StateVector,
    pub method: LimitMethod,
}

fn check_dims(seq: &[StateVector]) -> Result<(), DiagnosticsError> {
    let d = seq[0].dim();
    if seq.iter().any(|s| s.dim() != d) {
        return Err(DiagnosticsError::LengthMismatch("terms have different dimensions".into()));
    }
    Ok(())
}

/// Estimates the limit of a sequence.
///
/// The last term is returned once the sequence has numerically converged
/// (its last three differences shrink by at least 0.9 or sit at the noise
/// floor, and the last one is below `CONVERGED_FLOOR (1 + ‖s_N‖)`). Otherwise
/// the componentwise Aitken value of the last window is returned. Sequences
/// whose nonzero differences never decrease over the last ten steps are
/// rejected.
pub fn estimate_limit(seq: &[StateVector]) -> Result<LimitEstimate, DiagnosticsError> {
    if seq.len() < MIN_LEN {
        return Err(DiagnosticsError::TooShort(seq.len()));
    }
    check_dims(seq)?;
    let last = &seq[seq.len() - 1];
    let floor = CONVERGED_FLOOR * (1.0 + last.norm());
    let diffs: Vec<f64> = seq.windows(2).map(|w| w[1].distance(&w[0])).collect();
    let d_last = *diffs.last().expect("len >= 5");

    let recent = &diffs[diffs.len().saturating_sub(GROWTH_WINDOW)..];
    if d_last > floor && recent.windows(2).all(|w| w[1] >= w[0]) {
        return Err(DiagnosticsError::NotConverging(recent.len()));
    }

    let tail = &diffs[diffs.len() - 3..];
    let shrinking = tail.windows(2).all(|w| w[1] <= 0.9 * w[0] || w[1] <= floor);
    if shrinking && d_last <= floor {
        return Ok(LimitEstimate { value: last.clone(), method: LimitMethod::LastTerm });
    }

    let n = seq.len();
    let (s0, s1, s2) = (&seq[n - 3], &seq[n - 2], &seq[n - 1]);
    let window = AitkenWindow::new(s0.clone(), s1.clone(), s2.clone(), &vec![true; s0.dim()], DEFAULT_FLOOR)
        .expect("dimensions checked");
    let value: Vec<f64> = (0..s0.dim())
        .map(|i| {
            if window.gate()[i] {
                let d1 = s1[i] - s0[i];
                s0[i] - d1 * d1 / (s0[i] - 2.0 * s1[i] + s2[i])
            } else {
                s2[i]
            }
        })
        .collect();
    Ok(LimitEstimate {
        value: StateVector::new(value).expect("gated extrapolation is finite"),
        method: LimitMethod::AitkenExtrapolation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelerationRatio {
    pub index: usize,
    pub ratio: f64,
}

/// `‖accel_n - L‖ / ‖raw_n - L‖` where the denominator exceeds
/// `RATIO_FLOOR (1 + ‖L‖)`. `accel[k]` must be the corrected term built from
/// `raw[k..=k+2]`.
pub fn acceleration_ratio(
    raw: &[StateVector],
    accel: &[StateVector],
    limit: &StateVector,
) -> Result<Vec<AccelerationRatio>, DiagnosticsError> {
    if accel.len() + 2 != raw.len() {
        return Err(DiagnosticsError::LengthMismatch(format!(
            "{} raw terms need {} accelerated terms, got {}",
            raw.len(),
            raw.len().saturating_sub(2),
            accel.len()
        )));
    }
    if raw.iter().chain(accel).any(|s| s.dim() != limit.dim()) {
        return Err(DiagnosticsError::LengthMismatch("dimension differs from the limit".into()));
    }
    let floor = RATIO_FLOOR * (1.0 + limit.norm());
    Ok(raw
        .iter()
        .zip(accel)
        .enumerate()
        .filter_map(|(index, (r, a))| {
            let den = r.distance(limit);
            (den > floor).then(|| AccelerationRatio { index, ratio: a.distance(limit) / den })
        })
        .collect())
}

/// Whether two sequences share a limit: `‖L_a - L_b‖ ≤ tol (1 + max(‖L_a‖, ‖L_b‖))`.
pub fn sequences_equivalent(a: &[StateVector], b: &[StateVector], tol: f64) -> Result<bool, DiagnosticsError> {
    let la = estimate_limit(a)?.value;
    let lb = estimate_limit(b)?.value;
    Ok(la.distance(&lb) <= tol * (1.0 + la.norm().max(lb.norm())))
}

/// `‖[1 + a_n(b_n - 1)](Sz)* - (1 - a_n)(Sy)* - a_n b_n T^n y_n‖` per row,
/// with both limits estimated from the trace.
pub fn limit_identity_residuals(trace: &IterationTrace) -> Result<Vec<f64>, DiagnosticsError> {
    let sz_lim = estimate_limit(&trace.sz())?.value;
    let sy_lim = estimate_limit(&trace.sy())?.value;
    Ok(trace
        .rows
        .iter()
        .map(|r| {
            let (a, b) = (r.a, r.b);
            let v = sz_lim.as_dvector() * (1.0 + a * (b - 1.0))
                - sy_lim.as_dvector() * (1.0 - a)
                - r.ty.as_dvector() * (a * b);
            v.norm()
        })
        .collect())
}

/// Error norms, rates and acceleration ratios of a raw sequence and its
/// Aitken companion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub estimated_limit: LimitEstimate,
    pub errors: Vec<f64>,
    /// `(n, e_{n+1} / e_n)` where `e_n` exceeds the ratio floor.
    pub rates: Vec<(usize, f64)>,
    pub acceleration: Vec<AccelerationRatio>,
    /// Limit of the accelerated sequence, when it is long enough to estimate.
    pub accelerated_limit: Option<LimitEstimate>,
    /// Raw and accelerated sequences share a limit to `tol`.
    pub equivalent: Option<bool>,
}

impl ConvergenceReport {
    pub fn analyze(raw: &[StateVector], accel: &[StateVector], tol: f64) -> Result<Self, DiagnosticsError> {
        let estimated_limit = estimate_limit(raw)?;
        let l = &estimated_limit.value;
        let floor = RATIO_FLOOR * (1.0 + l.norm());
        let errors: Vec<f64> = raw.iter().map(|s| s.distance(l)).collect();
        let rates = errors
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > floor)
            .map(|(n, w)| (n, w[1] / w[0]))
            .collect();
        let acceleration = acceleration_ratio(raw, accel, l)?;
        let accelerated_limit = if accel.len() >= MIN_LEN { estimate_limit(accel).ok() } else { None };
        let equivalent = accelerated_limit
            .as_ref()
            .map(|al| al.value.distance(l) <= tol * (1.0 + l.norm().max(al.value.norm())));
        Ok(ConvergenceReport { estimated_limit, errors, rates, acceleration, accelerated_limit, equivalent })
    }
}
