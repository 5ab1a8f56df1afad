use crate::engine::EngineError;
use crate::model::{Schedule, StateVector};

/// All quantities produced at iteration index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub z: StateVector,
    pub y: StateVector,
    pub sz: StateVector,
    pub sy: StateVector,
    /// `T^n z_n`
    pub tz: StateVector,
    /// `T^n y_n`
    pub ty: StateVector,
}

#[derive(Debug, Clone)]
pub struct TraceMeta {
    pub a: Schedule,
    pub b: Schedule,
    pub steps: usize,
    pub solver_tol: f64,
    pub floor: f64,
    pub dim: usize,
}

/// History of one run of the iteration.
///
/// `accel_z[k]` and `accel_y[k]` are built from rows `k..=k+2`, so they
/// exist only for `k < rows.len() - 2`.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub accel_z: Vec<StateVector>,
    pub accel_y: Vec<StateVector>,
    pub gates_z: Vec<Vec<bool>>,
    pub gates_y: Vec<Vec<bool>>,
    pub meta: TraceMeta,
    /// Set when the run stopped before `steps` rows were produced.
    pub halt: Option<EngineError>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn diverged(&self) -> bool {
        self.halt.is_some()
    }

    pub fn z(&self) -> Vec<StateVector> {
        self.rows.iter().map(|r| r.z.clone()).collect()
    }

    pub fn y(&self) -> Vec<StateVector> {
        self.rows.iter().map(|r| r.y.clone()).collect()
    }

    pub fn sz(&self) -> Vec<StateVector> {
        self.rows.iter().map(|r| r.sz.clone()).collect()
    }

    pub fn sy(&self) -> Vec<StateVector> {
        self.rows.iter().map(|r| r.sy.clone()).collect()
    }

    pub fn row(&self, n: usize) -> Option<&TraceRow> {
        self.rows.get(n)
    }
}
