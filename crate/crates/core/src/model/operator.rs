use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Dyn, LU};

use super::{ModelError, StateVector};

/// Callback form of a nonlinear map. Output dimension and finiteness are
/// checked on every evaluation.
pub type MapFn = Arc<dyn Fn(&StateVector) -> Vec<f64> + Send + Sync>;

/// Callback that solves `S u = v` for `u`; `None` signals failure.
pub type SolveFn = Arc<dyn Fn(&StateVector) -> Option<Vec<f64>> + Send + Sync>;

#[derive(Clone)]
pub enum Operator {
    Linear(DMatrix<f64>),
    Map { dim: usize, f: MapFn },
}

impl Operator {
    pub fn linear(m: DMatrix<f64>) -> Result<Self, ModelError> {
        if m.nrows() != m.ncols() {
            return Err(ModelError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(ModelError::EmptyVector);
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteMatrix);
        }
        Ok(Operator::Linear(m))
    }

    /// Builds a linear operator from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(ModelError::NotSquare { rows: n, cols: bad.len() });
        }
        Self::linear(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Operator::Linear(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Result<Self, ModelError> {
        Self::linear(DMatrix::identity(dim, dim) * s)
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self, ModelError> {
        Self::linear(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
    }

    pub fn map(dim: usize, f: impl Fn(&StateVector) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Operator::Map { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Linear(m) => m.nrows(),
            Operator::Map { dim, .. } => *dim,
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            Operator::Linear(m) => Some(m),
            Operator::Map { .. } => None,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Operator::Linear(_))
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector, ModelError> {
        if x.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), found: x.dim() });
        }
        match self {
            Operator::Linear(m) => StateVector::from_dvector(m * x.as_dvector()),
            Operator::Map { dim, f } => {
                let out = f(x);
                if out.len() != *dim {
                    return Err(ModelError::DimensionMismatch { expected: *dim, found: out.len() });
                }
                StateVector::new(out)
            }
        }
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operator::Linear(m) => f.debug_tuple("Linear").field(m).finish(),
            Operator::Map { dim, .. } => f.debug_struct("Map").field("dim", dim).finish_non_exhaustive(),
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value, which for a square matrix is the minimum
/// modulus `inf ‖Mx‖ / ‖x‖`.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.singular_values().min()
}

#[derive(Clone)]
enum Solver {
    Lu(LU<f64, Dyn, Dyn>),
    User(SolveFn),
}

/// The two maps of the iteration together with the means to invert `S`.
///
/// Norm data is cached at construction for linear operators and is `None`
/// otherwise.
#[derive(Clone)]
pub struct OperatorPair {
    s: Operator,
    t: Operator,
    solver: Solver,
    tol: f64,
    t_norm: Option<f64>,
    s_norm: Option<f64>,
    s_min_modulus: Option<f64>,
}

impl OperatorPair {
    /// Pairs two operators. `S` must be linear here; use
    /// [`OperatorPair::with_solver`] when `S` is a user map.
    pub fn new(s: Operator, t: Operator, tol: f64) -> Result<Self, ModelError> {
        if !s.is_linear() {
            return Err(ModelError::MissingSolver);
        }
        Self::build(s, t, None, tol)
    }

    pub fn with_solver(
        s: Operator,
        t: Operator,
        solve: impl Fn(&StateVector) -> Option<Vec<f64>> + Send + Sync + 'static,
        tol: f64,
    ) -> Result<Self, ModelError> {
        Self::build(s, t, Some(Arc::new(solve)), tol)
    }

    fn build(s: Operator, t: Operator, user: Option<SolveFn>, tol: f64) -> Result<Self, ModelError> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(ModelError::InvalidTolerance(tol));
        }
        if s.dim() != t.dim() {
            return Err(ModelError::DimensionMismatch { expected: s.dim(), found: t.dim() });
        }
        let t_norm = t.matrix().map(spectral_norm);
        let (s_norm, s_min_modulus) = match s.matrix() {
            Some(m) => {
                let sv = m.singular_values();
                let mu = sv.min();
                if mu <= tol {
                    return Err(ModelError::SingularS { min_modulus: mu, tol });
                }
                (Some(sv.max()), Some(mu))
            }
            None => (None, None),
        };
        let solver = match (user, s.matrix()) {
            (Some(f), _) => Solver::User(f),
            (None, Some(m)) => Solver::Lu(m.clone().lu()),
            (None, None) => return Err(ModelError::MissingSolver),
        };
        Ok(OperatorPair { s, t, solver, tol, t_norm, s_norm, s_min_modulus })
    }

    pub fn s(&self) -> &Operator {
        &self.s
    }

    pub fn t(&self) -> &Operator {
        &self.t
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Spectral norm of `T`, if `T` is a matrix.
    pub fn t_norm(&self) -> Option<f64> {
        self.t_norm
    }

    pub fn s_norm(&self) -> Option<f64> {
        self.s_norm
    }

    /// Minimum modulus μ(S), if `S` is a matrix.
    pub fn s_min_modulus(&self) -> Option<f64> {
        self.s_min_modulus
    }

    pub fn is_linear(&self) -> bool {
        self.s.is_linear() && self.t.is_linear()
    }

    /// Solves `S u = v` for `u`.
    pub fn solve(&self, v: &StateVector) -> Result<StateVector, ModelError> {
        if v.dim() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), found: v.dim() });
        }
        let u = match &self.solver {
            Solver::Lu(lu) => lu.solve(v.as_dvector()).ok_or(ModelError::SolveFailure)?,
            Solver::User(f) => {
                let out = f(v).ok_or(ModelError::SolveFailure)?;
                if out.len() != self.dim() {
                    return Err(ModelError::DimensionMismatch { expected: self.dim(), found: out.len() });
                }
                nalgebra::DVector::from_vec(out)
            }
        };
        StateVector::from_dvector(u).map_err(|_| ModelError::SolveFailure)
    }

    /// `S⁻¹` as a matrix, for linear `S`.
    pub fn s_inverse(&self) -> Option<DMatrix<f64>> {
        match &self.solver {
            Solver::Lu(lu) => lu.try_inverse(),
            Solver::User(_) => None,
        }
    }
}

impl fmt::Debug for OperatorPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorPair")
            .field("s", &self.s)
            .field("t", &self.t)
            .field("t_norm", &self.t_norm)
            .field("s_min_modulus", &self.s_min_modulus)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_half_identity() {
        let pair = OperatorPair::new(
            Operator::identity(2),
            Operator::scaled_identity(2, 0.5).unwrap(),
            1e-12,
        )
        .unwrap();
        assert!((pair.s_min_modulus().unwrap() - 1.0).abs() < 1e-14);
        assert!((pair.t_norm().unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn diagonal_min_modulus_is_smallest_entry() {
        let pair = OperatorPair::new(
            Operator::diagonal(&[2.0, 0.5]).unwrap(),
            Operator::identity(2),
            1e-12,
        )
        .unwrap();
        assert!((pair.s_min_modulus().unwrap() - 0.5).abs() < 1e-14);
        assert!((pair.s_norm().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_s_is_singular() {
        let s = Operator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let err = OperatorPair::new(s, Operator::identity(2), 1e-12).unwrap_err();
        assert!(matches!(err, ModelError::SingularS { .. }));
    }

    #[test]
    fn dimension_mismatch() {
        let err = OperatorPair::new(Operator::identity(2), Operator::identity(3), 1e-12).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn user_map_pair_has_no_norms() {
        let s = Operator::map(1, |x| vec![2.0 * x[0]]);
        let t = Operator::map(1, |x| vec![x[0].sin()]);
        assert!(matches!(
            OperatorPair::new(s.clone(), t.clone(), 1e-12),
            Err(ModelError::MissingSolver)
        ));
        let pair = OperatorPair::with_solver(s, t, |v| Some(vec![v[0] / 2.0]), 1e-12).unwrap();
        assert!(pair.t_norm().is_none());
        assert!(pair.s_min_modulus().is_none());
        let u = pair.solve(&StateVector::scalar(3.0).unwrap()).unwrap();
        assert_eq!(u[0], 1.5);
    }

    #[test]
    fn map_dimension_is_checked() {
        let bad = Operator::map(2, |_| vec![1.0]);
        let x = StateVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(bad.apply(&x), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn non_square_rejected() {
        assert!(Operator::from_rows(&[vec![1.0, 2.0]]).is_err());
    }
}
