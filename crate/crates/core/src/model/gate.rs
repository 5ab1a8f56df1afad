use super::ModelError;

/// Decides whether the Aitken correction is applied at a given index.
///
/// The policy is only half of the decision: a component whose second
/// difference falls under the denominator floor is never corrected, whatever
/// the policy says (see [`crate::aitken`]).
#[derive(Debug, Clone, PartialEq)]
pub enum GatePolicy {
    AlwaysOn,
    AlwaysOff,
    /// On iff `|Δ²| > τ` for the component.
    Threshold(f64),
    /// One gate per index, shared by all components.
    List(Vec<bool>),
}

impl GatePolicy {
    pub fn threshold(tau: f64) -> Result<Self, ModelError> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(ModelError::InvalidTolerance(tau));
        }
        Ok(GatePolicy::Threshold(tau))
    }

    pub fn is_always_off(&self) -> bool {
        match self {
            GatePolicy::AlwaysOff => true,
            GatePolicy::List(g) => g.iter().all(|on| !on),
            _ => false,
        }
    }

    /// Policy gate at index `k` for a component with second difference `delta2`.
    pub fn gate(&self, k: usize, delta2: f64) -> Result<bool, ModelError> {
        match self {
            GatePolicy::AlwaysOn => Ok(true),
            GatePolicy::AlwaysOff => Ok(false),
            GatePolicy::Threshold(tau) => Ok(delta2.abs() > *tau),
            GatePolicy::List(g) => g
                .get(k)
                .copied()
                .ok_or(ModelError::IndexOutOfRange { index: k, len: g.len() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_gates() {
        assert!(GatePolicy::AlwaysOn.gate(3, 0.0).unwrap());
        assert!(!GatePolicy::AlwaysOff.gate(3, 1.0).unwrap());
        let t = GatePolicy::threshold(1e-3).unwrap();
        assert!(!t.gate(0, 1e-3).unwrap());
        assert!(t.gate(0, -2e-3).unwrap());
        let l = GatePolicy::List(vec![true, false]);
        assert!(!l.gate(1, 1.0).unwrap());
        assert!(l.gate(2, 1.0).is_err());
        assert!(GatePolicy::threshold(-1.0).is_err());
    }
}
