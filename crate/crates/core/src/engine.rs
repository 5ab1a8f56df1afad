//! The generalized Jungck-modified S-iteration.
//!
//! Starting from `z_0` (index `n = 0`, with `T^0 = I`), each step computes
//!
//! ```text
//! S y_n     = (1 - b_n) S z_n + b_n T^n z_n
//! S z_{n+1} = (1 - a_n) T^n z_n + a_n T^n y_n
//! ```
//!
//! recovering `y_n` and `z_{n+1}` through the pair's solver. The raw
//! sequences `{S z_n}` and `{S y_n}` are then passed through the gated
//! Aitken corrector.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::aitken::{self, AitkenError, DEFAULT_FLOOR};
use crate::model::{Domain, GatePolicy, ModelError, Operator, OperatorPair, Schedule, StateVector};
use crate::trace::{IterationTrace, TraceMeta, TraceRow};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("solve for S u = v failed at step {n}")]
    SolveFailure { n: usize },
    #[error("non-finite value at step {n}")]
    Overflow { n: usize },
    #[error("iterate left the working domain at step {n}")]
    DomainViolation { n: usize },
    #[error("index {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("schedule evaluation failed at step {n}: {source}")]
    Schedule { n: usize, source: ModelError },
    #[error(transparent)]
    Aitken(#[from] AitkenError),
}

/// How `T^n x` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Keep `M_n = T M_{n-1}` across steps; linear `T` only.
    MatrixCached,
    /// Apply `T` to the vector `n` times; cost grows linearly in `n`.
    RepeatedApply,
}

#[derive(Debug, Clone)]
pub struct JungckConfig {
    pub pair: OperatorPair,
    pub a: Schedule,
    pub b: Schedule,
    pub gates_z: GatePolicy,
    pub gates_y: GatePolicy,
    pub z0: StateVector,
    pub steps: usize,
    /// Relative Aitken denominator floor.
    pub floor: f64,
    pub power_mode: PowerMode,
    pub domain: Domain,
}

impl JungckConfig {
    /// Config with both gates always on, the default floor, cached powers
    /// for linear `T` and the full space as domain.
    pub fn new(pair: OperatorPair, a: Schedule, b: Schedule, z0: StateVector, steps: usize) -> Self {
        let power_mode = if pair.t().is_linear() {
            PowerMode::MatrixCached
        } else {
            PowerMode::RepeatedApply
        };
        JungckConfig {
            pair,
            a,
            b,
            gates_z: GatePolicy::AlwaysOn,
            gates_y: GatePolicy::AlwaysOn,
            z0,
            steps,
            floor: DEFAULT_FLOOR,
            power_mode,
            domain: Domain::Full,
        }
    }

    pub fn with_gates(mut self, gates_z: GatePolicy, gates_y: GatePolicy) -> Self {
        self.gates_z = gates_z;
        self.gates_y = gates_y;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.z0.dim() != self.pair.dim() {
            return bad(format!("z0 has dimension {}, operators have {}", self.z0.dim(), self.pair.dim()));
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        let gated = !(self.gates_z.is_always_off() && self.gates_y.is_always_off());
        if gated && self.steps < 3 {
            return bad(format!("Aitken correction needs at least 3 steps, got {}", self.steps));
        }
        for (name, s) in [("a", &self.a), ("b", &self.b)] {
            let (lo, hi) = s.clamp_range();
            if lo < 0.0 || hi > 1.0 {
                return bad(format!("schedule {name} must be clamped into [0, 1], got [{lo}, {hi}]"));
            }
            if let Some(len) = s.len() {
                if len < self.steps {
                    return bad(format!("schedule {name} has {len} values, need {}", self.steps));
                }
            }
        }
        for (name, g) in [("gates_z", &self.gates_z), ("gates_y", &self.gates_y)] {
            if let GatePolicy::List(v) = g {
                if v.len() < self.steps.saturating_sub(2) {
                    return bad(format!("{name} has {} entries, need {}", v.len(), self.steps - 2));
                }
            }
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return bad(format!("floor must be positive, got {}", self.floor));
        }
        if self.power_mode == PowerMode::MatrixCached && !self.pair.t().is_linear() {
            return bad("matrix-cached powers need a linear T".into());
        }
        if !self.domain.contains(&self.z0) {
            return bad("z0 lies outside the working domain".into());
        }
        Ok(())
    }
}

/// Evaluates `T^n x`, caching the matrix power across calls in
/// [`PowerMode::MatrixCached`].
#[derive(Debug, Clone)]
pub struct PowerCache {
    mode: PowerMode,
    power: usize,
    matrix: Option<DMatrix<f64>>,
}

impl PowerCache {
    pub fn new(mode: PowerMode) -> Self {
        PowerCache { mode, power: 0, matrix: None }
    }

    pub fn apply(&mut self, t: &Operator, n: usize, x: &StateVector) -> Result<StateVector, EngineError> {
        if n == 0 {
            return Ok(x.clone());
        }
        match (self.mode, t) {
            (PowerMode::MatrixCached, Operator::Linear(m)) => {
                let d = m.nrows();
                let cur = match self.matrix.take() {
                    Some(cur) if self.power <= n => cur,
                    _ => {
                        self.power = 0;
                        DMatrix::identity(d, d)
                    }
                };
                let mut cur = cur;
                while self.power < n {
                    cur = m * cur;
                    self.power += 1;
                    if cur.iter().any(|v| !v.is_finite()) {
                        self.power = 0;
                        return Err(EngineError::Overflow { n });
                    }
                }
                let out = StateVector::from_dvector(&cur * x.as_dvector()).map_err(|_| EngineError::Overflow { n });
                self.matrix = Some(cur);
                out
            }
            (PowerMode::MatrixCached, Operator::Map { .. }) => {
                Err(EngineError::InvalidConfig("matrix-cached powers need a linear T".into()))
            }
            (PowerMode::RepeatedApply, _) => {
                let mut v = x.clone();
                for _ in 0..n {
                    v = apply_op(t, &v, n)?;
                }
                Ok(v)
            }
        }
    }
}

/// `T^n x`, computed from scratch.
pub fn power_apply(t: &Operator, n: usize, x: &StateVector, mode: PowerMode) -> Result<StateVector, EngineError> {
    PowerCache::new(mode).apply(t, n, x)
}

fn apply_op(op: &Operator, x: &StateVector, n: usize) -> Result<StateVector, EngineError> {
    op.apply(x).map_err(|e| match e {
        ModelError::NonFinite { .. } => EngineError::Overflow { n },
        other => EngineError::InvalidConfig(other.to_string()),
    })
}

fn lin_comb(n: usize, alpha: f64, x: &StateVector, beta: f64, y: &StateVector) -> Result<StateVector, EngineError> {
    x.lin_comb(alpha, beta, y).map_err(|_| EngineError::Overflow { n })
}

/// Output of one step at index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JungckStep {
    pub a: f64,
    pub b: f64,
    pub y: StateVector,
    pub sy: StateVector,
    pub tz: StateVector,
    pub ty: StateVector,
    pub z_next: StateVector,
    pub sz_next: StateVector,
}

struct Stepper<'a> {
    cfg: &'a JungckConfig,
    powers: PowerCache,
}

/// The half of a step that produces `y_n`.
struct HalfStep {
    a: f64,
    b: f64,
    y: StateVector,
    sy: StateVector,
    tz: StateVector,
    ty: StateVector,
}

impl<'a> Stepper<'a> {
    fn new(cfg: &'a JungckConfig) -> Self {
        Stepper { cfg, powers: PowerCache::new(cfg.power_mode) }
    }

    fn solve(&self, n: usize, v: &StateVector) -> Result<StateVector, EngineError> {
        let u = self.cfg.pair.solve(v).map_err(|_| EngineError::SolveFailure { n })?;
        if !self.cfg.domain.contains(&u) {
            return Err(EngineError::DomainViolation { n });
        }
        Ok(u)
    }

    fn half(&mut self, n: usize, z: &StateVector, sz: &StateVector) -> Result<HalfStep, EngineError> {
        let cfg = self.cfg;
        let a = cfg.a.eval(n).map_err(|source| EngineError::Schedule { n, source })?;
        let b = cfg.b.eval(n).map_err(|source| EngineError::Schedule { n, source })?;
        let t = cfg.pair.t();
        let tz = self.powers.apply(t, n, z)?;
        let sy = lin_comb(n, 1.0 - b, sz, b, &tz)?;
        let y = self.solve(n, &sy)?;
        let ty = self.powers.apply(t, n, &y)?;
        Ok(HalfStep { a, b, y, sy, tz, ty })
    }

    fn full(&mut self, n: usize, z: &StateVector, sz: &StateVector) -> Result<JungckStep, EngineError> {
        let h = self.half(n, z, sz)?;
        let sz_next = lin_comb(n, 1.0 - h.a, &h.tz, h.a, &h.ty)?;
        let z_next = self.solve(n, &sz_next)?;
        Ok(JungckStep { a: h.a, b: h.b, y: h.y, sy: h.sy, tz: h.tz, ty: h.ty, z_next, sz_next })
    }
}

/// One step of the iteration at index `n` from `(z_n, S z_n)`.
pub fn jungck_step(cfg: &JungckConfig, n: usize, z: &StateVector, sz: &StateVector) -> Result<JungckStep, EngineError> {
    Stepper::new(cfg).full(n, z, sz)
}

/// Runs `cfg.steps` rows of the iteration and accelerates both raw
/// sequences.
///
/// Configuration errors are returned as `Err`. A failure during the
/// iteration (overflow, solver failure, domain exit) stops the run and is
/// recorded in [`IterationTrace::halt`] with the rows produced so far.
pub fn run(cfg: &JungckConfig) -> Result<IterationTrace, EngineError> {
    cfg.validate()?;
    let mut stepper = Stepper::new(cfg);
    let mut rows = Vec::with_capacity(cfg.steps);
    let mut halt = None;

    let mut z = cfg.z0.clone();
    let mut sz = apply_op(cfg.pair.s(), &z, 0)?;
    for n in 0..cfg.steps {
        let last = n + 1 == cfg.steps;
        let res = if last {
            stepper.half(n, &z, &sz).map(|h| (h, None))
        } else {
            stepper.full(n, &z, &sz).map(|s| {
                let next = (s.z_next, s.sz_next);
                (HalfStep { a: s.a, b: s.b, y: s.y, sy: s.sy, tz: s.tz, ty: s.ty }, Some(next))
            })
        };
        match res {
            Ok((h, next)) => {
                rows.push(TraceRow { n, a: h.a, b: h.b, z: z.clone(), y: h.y, sz: sz.clone(), sy: h.sy, tz: h.tz, ty: h.ty });
                if let Some((zn, szn)) = next {
                    z = zn;
                    sz = szn;
                }
            }
            Err(e) => {
                log::warn!("run halted at step {n}: {e}");
                halt = Some(e);
                break;
            }
        }
    }

    let mut trace = IterationTrace {
        rows,
        accel_z: Vec::new(),
        accel_y: Vec::new(),
        gates_z: Vec::new(),
        gates_y: Vec::new(),
        meta: TraceMeta {
            a: cfg.a.clone(),
            b: cfg.b.clone(),
            steps: cfg.steps,
            solver_tol: cfg.pair.tolerance(),
            floor: cfg.floor,
            dim: cfg.pair.dim(),
        },
        halt,
    };
    if trace.rows.len() >= 3 {
        let acc_z = aitken::accelerate_sequence(&trace.sz(), &cfg.gates_z, cfg.floor)?;
        let acc_y = aitken::accelerate_sequence(&trace.sy(), &cfg.gates_y, cfg.floor)?;
        trace.accel_z = acc_z.values;
        trace.gates_z = acc_z.gates;
        trace.accel_y = acc_y.values;
        trace.gates_y = acc_y.gates;
    }
    Ok(trace)
}

/// Norm of `b_n S z_{n+1} + (1-a_n)(1-b_n) S z_n - (1-a_n) S y_n - a_n b_n T^n y_n`.
///
/// The expression vanishes identically for exact arithmetic, so the value
/// measures accumulated rounding in step `n`.
pub fn identity_residual(trace: &IterationTrace, n: usize) -> Result<f64, EngineError> {
    let len = trace.rows.len();
    if n + 1 >= len {
        return Err(EngineError::IndexOutOfRange { index: n + 1, len });
    }
    let r = &trace.rows[n];
    let next = &trace.rows[n + 1];
    let (a, b) = (r.a, r.b);
    let v = next.sz.as_dvector() * b + r.sz.as_dvector() * ((1.0 - a) * (1.0 - b))
        - r.sy.as_dvector() * (1.0 - a)
        - r.ty.as_dvector() * (a * b);
    Ok(v.norm())
}

/// Largest of `identity_residual(n) / (1 + ‖S z_{n+1}‖)` over the trace.
pub fn max_relative_identity_residual(trace: &IterationTrace) -> f64 {
    (0..trace.len().saturating_sub(1))
        .map(|n| {
            let r = identity_residual(trace, n).expect("index in range");
            r / (1.0 + trace.rows[n + 1].sz.norm())
        })
        .fold(0.0, f64::max)
}
