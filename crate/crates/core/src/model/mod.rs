//! Shared domain types: state vectors, operators, schedules and gates.

mod gate;
mod operator;
mod schedule;
mod vector;

pub use gate::GatePolicy;
pub use operator::{min_singular_value, spectral_norm, MapFn, Operator, OperatorPair, SolveFn};
pub use schedule::{Schedule, ScheduleForm, SeriesBehavior};
pub use vector::StateVector;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("vector has no entries")]
    EmptyVector,
    #[error("non-finite value {value} at component {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("matrix has non-finite entries")]
    NonFiniteMatrix,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("S is singular: minimum modulus {min_modulus:e} <= tolerance {tol:e}")]
    SingularS { min_modulus: f64, tol: f64 },
    #[error("S is not a matrix and no solver was supplied")]
    MissingSolver,
    #[error("solving S u = v failed")]
    SolveFailure,
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid clamp range [{lo}, {hi}]")]
    InvalidClamp { lo: f64, hi: f64 },
    #[error("schedule value {value} outside [{lo}, {hi}]")]
    ScheduleOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("schedule list is empty")]
    EmptySchedule,
    #[error("invalid schedule parameter: {0}")]
    InvalidScheduleParameter(String),
}

/// The working subset of ℝ^d on which the maps act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Domain {
    #[default]
    Full,
    NonnegativeOrthant,
}

impl Domain {
    /// Membership test with a small relative slack for rounding.
    pub fn contains(&self, x: &StateVector) -> bool {
        match self {
            Domain::Full => true,
            Domain::NonnegativeOrthant => {
                let slack = 1e-12 * (1.0 + x.norm());
                x.iter().all(|&v| v >= -slack)
            }
        }
    }
}
