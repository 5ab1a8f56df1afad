//! Gated Aitken Δ² correction.
//!
//! For three consecutive terms `s0, s1, s2` of a sequence the corrected value
//! is `s0 - (s1 - s0)² / (s0 - 2 s1 + s2)`, evaluated componentwise. Each
//! component carries a binary gate; a closed gate returns `s0` unchanged. A
//! gate is forced closed when the second difference is within the floor
//! `τ (1 + |s0|)` of zero, or when the quotient would not be finite, so the
//! corrected vector is always finite.

use thiserror::Error;

use crate::model::{GatePolicy, ModelError, StateVector};

/// Default relative denominator floor.
pub const DEFAULT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AitkenError {
    #[error("need at least 3 terms, got {0}")]
    TooShort(usize),
    #[error("window terms have mismatched dimensions")]
    DimensionMismatch,
    #[error("denominator floor must be positive and finite, got {0}")]
    InvalidFloor(f64),
    #[error(transparent)]
    Policy(#[from] ModelError),
}

/// Three consecutive terms together with the effective per-component gate.
#[derive(Debug, Clone)]
pub struct AitkenWindow {
    s0: StateVector,
    s1: StateVector,
    s2: StateVector,
    gate: Vec<bool>,
}

impl AitkenWindow {
    /// Builds a window whose gate is `requested[i]` AND the floor rule.
    pub fn new(
        s0: StateVector,
        s1: StateVector,
        s2: StateVector,
        requested: &[bool],
        tau: f64,
    ) -> Result<Self, AitkenError> {
        let d = s0.dim();
        if s1.dim() != d || s2.dim() != d || requested.len() != d {
            return Err(AitkenError::DimensionMismatch);
        }
        check_floor(tau)?;
        let gate = (0..d)
            .map(|i| requested[i] && correction(s0[i], s1[i], s2[i], tau).is_some())
            .collect();
        Ok(AitkenWindow { s0, s1, s2, gate })
    }

    /// Window at sequence index `k`, gated by `policy`.
    pub fn from_policy(
        s0: StateVector,
        s1: StateVector,
        s2: StateVector,
        policy: &GatePolicy,
        k: usize,
        tau: f64,
    ) -> Result<Self, AitkenError> {
        let requested = (0..s0.dim())
            .map(|i| policy.gate(k, second_difference(s0[i], s1[i], s2[i])))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(s0, s1, s2, &requested, tau)
    }

    pub fn gate(&self) -> &[bool] {
        &self.gate
    }

    pub fn terms(&self) -> [&StateVector; 3] {
        [&self.s0, &self.s1, &self.s2]
    }
}

fn check_floor(tau: f64) -> Result<(), AitkenError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(AitkenError::InvalidFloor(tau))
    }
}

#[inline]
fn second_difference(s0: f64, s1: f64, s2: f64) -> f64 {
    s0 - 2.0 * s1 + s2
}

/// The Δ² correction term `(s1 - s0)² / Δ²`, or `None` when the floor or
/// finiteness rule closes the gate.
fn correction(s0: f64, s1: f64, s2: f64, tau: f64) -> Option<f64> {
    let d2 = second_difference(s0, s1, s2);
    if !d2.is_finite() || d2.abs() <= tau * (1.0 + s0.abs()) {
        return None;
    }
    let d1 = s1 - s0;
    let c = d1 * d1 / d2;
    (c.is_finite() && (s0 - c).is_finite()).then_some(c)
}

/// Applies the correction to every open component of the window.
pub fn aitken_correct(w: &AitkenWindow) -> StateVector {
    let out: Vec<f64> = (0..w.s0.dim())
        .map(|i| {
            let s0 = w.s0[i];
            if !w.gate[i] {
                return s0;
            }
            // the window constructor already proved this finite
            let d1 = w.s1[i] - s0;
            s0 - d1 * d1 / second_difference(s0, w.s1[i], w.s2[i])
        })
        .collect();
    StateVector::new(out).expect("gated correction is finite")
}

/// A raw sequence's Aitken companion and the gates actually applied.
#[derive(Debug, Clone, Default)]
pub struct Accelerated {
    pub values: Vec<StateVector>,
    pub gates: Vec<Vec<bool>>,
}

/// Corrects every window `(k, k+1, k+2)` of `raw`, producing `raw.len() - 2`
/// terms aligned to the window start.
pub fn accelerate_sequence(raw: &[StateVector], policy: &GatePolicy, tau: f64) -> Result<Accelerated, AitkenError> {
    if raw.len() < 3 {
        return Err(AitkenError::TooShort(raw.len()));
    }
    check_floor(tau)?;
    let mut out = Accelerated::default();
    for (k, w) in raw.windows(3).enumerate() {
        let window = AitkenWindow::from_policy(w[0].clone(), w[1].clone(), w[2].clone(), policy, k, tau)?;
        out.values.push(aitken_correct(&window));
        out.gates.push(window.gate);
    }
    Ok(out)
}

/// Scalar convenience wrapper over [`accelerate_sequence`].
pub fn accelerate_scalars(raw: &[f64], policy: &GatePolicy, tau: f64) -> Result<Vec<f64>, AitkenError> {
    let raw = raw
        .iter()
        .map(|&x| StateVector::scalar(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(accelerate_sequence(&raw, policy, tau)?
        .values
        .into_iter()
        .map(|v| v[0])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: &[f64]) -> StateVector {
        StateVector::new(x.to_vec()).unwrap()
    }

    fn window(a: f64, b: f64, c: f64) -> AitkenWindow {
        AitkenWindow::new(sv(&[a]), sv(&[b]), sv(&[c]), &[true], DEFAULT_FLOOR).unwrap()
    }

    #[test]
    fn geometric_window_is_exact() {
        // s_n = 3 + 2 (0.5)^n
        let w = window(5.0, 4.0, 3.5);
        assert_eq!(aitken_correct(&w)[0], 3.0);
    }

    #[test]
    fn constant_window_closes_gate() {
        let w = window(7.0, 7.0, 7.0);
        assert_eq!(w.gate(), &[false]);
        assert_eq!(aitken_correct(&w)[0], 7.0);
    }

    #[test]
    fn harmonic_window() {
        let w = window(1.0, 0.5, 1.0 / 3.0);
        let expected = 1.0 - 0.25 / (1.0 / 3.0);
        assert!((aitken_correct(&w)[0] - expected).abs() < 1e-15);
        assert!((aitken_correct(&w)[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn overflowing_quotient_closes_gate() {
        let w = window(0.0, 1e200, 1e200 + 1e190);
        assert_eq!(w.gate(), &[false]);
        assert_eq!(aitken_correct(&w)[0], 0.0);
    }

    #[test]
    fn componentwise_gates_are_independent() {
        let w = AitkenWindow::new(sv(&[5.0, 7.0]), sv(&[4.0, 7.0]), sv(&[3.5, 7.0]), &[true, true], DEFAULT_FLOOR)
            .unwrap();
        assert_eq!(w.gate(), &[true, false]);
        let a = aitken_correct(&w);
        assert_eq!(a.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn geometric_sequence_always_on() {
        let out = accelerate_scalars(&[5.0, 4.0, 3.5, 3.25], &GatePolicy::AlwaysOn, DEFAULT_FLOOR).unwrap();
        assert_eq!(out, vec![3.0, 3.0]);
    }

    #[test]
    fn always_off_truncates() {
        let raw = [0.3, -1.2, 4.5, 2.25, 9.0];
        let out = accelerate_scalars(&raw, &GatePolicy::AlwaysOff, DEFAULT_FLOOR).unwrap();
        assert_eq!(out, raw[..3].to_vec());
    }

    #[test]
    fn constant_sequence_gates_all_off() {
        let raw: Vec<_> = (0..4).map(|_| sv(&[1.0])).collect();
        let acc = accelerate_sequence(&raw, &GatePolicy::AlwaysOn, 1e-12).unwrap();
        assert_eq!(acc.gates, vec![vec![false], vec![false]]);
        assert_eq!(acc.values, vec![sv(&[1.0]), sv(&[1.0])]);
    }

    #[test]
    fn too_short_and_bad_floor() {
        assert_eq!(
            accelerate_scalars(&[1.0, 2.0], &GatePolicy::AlwaysOn, 1e-12).unwrap_err(),
            AitkenError::TooShort(2)
        );
        assert!(matches!(
            accelerate_scalars(&[1.0, 2.0, 3.0], &GatePolicy::AlwaysOn, 0.0),
            Err(AitkenError::InvalidFloor(_))
        ));
    }

    #[test]
    fn list_policy_is_indexed_by_window_start() {
        let raw = [5.0, 4.0, 3.5, 3.25];
        let policy = GatePolicy::List(vec![false, true]);
        let out = accelerate_scalars(&raw, &policy, DEFAULT_FLOOR).unwrap();
        assert_eq!(out, vec![5.0, 3.0]);
        let short = GatePolicy::List(vec![true]);
        assert!(matches!(accelerate_scalars(&raw, &short, DEFAULT_FLOOR), Err(AitkenError::Policy(_))));
    }
}
