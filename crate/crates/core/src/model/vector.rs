use std::fmt;
use std::ops::Index;

use nalgebra::DVector;

use super::ModelError;

/// A finite real vector of fixed dimension.
///
/// Every constructor rejects NaN and infinite entries, so any `StateVector`
/// in hand is known to be finite.
#[derive(Clone, PartialEq)]
pub struct StateVector(DVector<f64>);

impl StateVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, ModelError> {
        Self::from_dvector(DVector::from_vec(entries))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self, ModelError> {
        if v.is_empty() {
            return Err(ModelError::EmptyVector);
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite { index: i, value: v[i] });
        }
        Ok(StateVector(v))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "state dimension must be positive");
        StateVector(DVector::zeros(dim))
    }

    pub fn scalar(x: f64) -> Result<Self, ModelError> {
        Self::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> + '_ {
        self.0.iter()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0.data.into()
    }

    /// `alpha * self + beta * other`, rejecting non-finite results.
    pub fn lin_comb(&self, alpha: f64, beta: f64, other: &StateVector) -> Result<Self, ModelError> {
        debug_assert_eq!(self.dim(), other.dim());
        Self::from_dvector(&self.0 * alpha + &other.0 * beta)
    }

    pub fn scaled(&self, s: f64) -> Result<Self, ModelError> {
        Self::from_dvector(&self.0 * s)
    }
}

impl Index<usize> for StateVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = ModelError;

    fn try_from(v: Vec<f64>) -> Result<Self, ModelError> {
        StateVector::new(v)
    }
}
