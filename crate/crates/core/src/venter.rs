//! Generalized Venter recursion `x_{n+1} = (1 - α_n + γ_n) x_n + ω_n + σ`.
//!
//! The recursion is usually stated as an inequality; the simulator runs the
//! equality, which dominates every sequence satisfying the inequality, so
//! each bound is checked at its worst case. The Cesàro constant
//! `K = lim (1/(n+1)) Σ (1 - α_i)` is replaced by its finite-horizon value
//! `K̂_N`.

use thiserror::Error;

use crate::model::{ModelError, Schedule, SeriesBehavior};

/// `K̂` above this value is flagged: the horizon is too short for `K < 1`
/// to be meaningful.
pub const K_HAT_WARNING: f64 = 0.99;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VenterError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{name}_{n} = {value} violates the recursion hypotheses")]
    ScheduleViolation { name: &'static str, n: usize, value: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error(transparent)]
    Schedule(#[from] ModelError),
    #[error("non-finite iterate at n = {0}")]
    Overflow(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VenterConfig {
    pub alpha: Schedule,
    pub gamma: Schedule,
    pub omega: Schedule,
    pub sigma: f64,
    pub x0: f64,
    pub steps: usize,
}

impl VenterConfig {
    pub fn new(alpha: Schedule, gamma: Schedule, omega: Schedule, sigma: f64, x0: f64, steps: usize) -> Result<Self, VenterError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(VenterError::InvalidConfig(format!("sigma must be nonnegative, got {sigma}")));
        }
        if !(x0 >= 0.0 && x0.is_finite()) {
            return Err(VenterError::InvalidConfig(format!("x0 must be nonnegative, got {x0}")));
        }
        if steps == 0 {
            return Err(VenterError::InvalidConfig("steps must be positive".into()));
        }
        Ok(VenterConfig { alpha, gamma, omega, sigma, x0, steps })
    }
}

/// Simulated recursion with running sums. Per-step vectors have length
/// `N`; `x` has length `N + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VenterTrace {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    /// `K̂_n = (1/(n+1)) Σ_{i≤n} (1 - α_i)`
    pub k_hat: Vec<f64>,
    /// `Σ_{i≤n} α_i x_i`
    pub sum_alpha_x: Vec<f64>,
    /// `Σ_{i≤n} (α_i - γ_i) x_i`
    pub sum_gap_x: Vec<f64>,
    /// `Σ_{i≤n} ω_i`
    pub sum_omega: Vec<f64>,
    /// `Σ_{i≤n} x_i`
    pub sum_x: Vec<f64>,
}

impl VenterTrace {
    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    pub fn final_k_hat(&self) -> f64 {
        *self.k_hat.last().expect("at least one step")
    }

    pub fn sup_x(&self) -> f64 {
        self.x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn venter_run(cfg: &VenterConfig) -> Result<VenterTrace, VenterError> {
    let n_steps = cfg.steps;
    let mut t = VenterTrace {
        x: Vec::with_capacity(n_steps + 1),
        alpha: Vec::with_capacity(n_steps),
        gamma: Vec::with_capacity(n_steps),
        omega: Vec::with_capacity(n_steps),
        k_hat: Vec::with_capacity(n_steps),
        sum_alpha_x: Vec::with_capacity(n_steps),
        sum_gap_x: Vec::with_capacity(n_steps),
        sum_omega: Vec::with_capacity(n_steps),
        sum_x: Vec::with_capacity(n_steps),
    };
    let mut x = cfg.x0;
    t.x.push(x);
    let (mut s_one_minus_alpha, mut s_ax, mut s_gx, mut s_w, mut s_x) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for n in 0..n_steps {
        let a = cfg.alpha.eval(n)?;
        let g = cfg.gamma.eval(n)?;
        let w = cfg.omega.eval(n)?;
        if !(a > 0.0 && a <= 1.0) {
            return Err(VenterError::ScheduleViolation { name: "alpha", n, value: a });
        }
        if !(g >= 0.0 && g.is_finite()) {
            return Err(VenterError::ScheduleViolation { name: "gamma", n, value: g });
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(VenterError::ScheduleViolation { name: "omega", n, value: w });
        }
        s_one_minus_alpha += 1.0 - a;
        s_ax += a * x;
        s_gx += (a - g) * x;
        s_w += w;
        s_x += x;
        t.alpha.push(a);
        t.gamma.push(g);
        t.omega.push(w);
        t.k_hat.push(s_one_minus_alpha / (n + 1) as f64);
        t.sum_alpha_x.push(s_ax);
        t.sum_gap_x.push(s_gx);
        t.sum_omega.push(s_w);
        t.sum_x.push(s_x);

        x = (1.0 - a + g) * x + w + cfg.sigma;
        if !x.is_finite() {
            return Err(VenterError::Overflow(n + 1));
        }
        t.x.push(x);
    }
    Ok(t)
}

fn check_same_run(t: &VenterTrace, cfg: &VenterConfig) -> Result<(), VenterError> {
    if t.steps() != cfg.steps || t.x.first() != Some(&cfg.x0) {
        return Err(VenterError::InvalidConfig("trace was not produced by this configuration".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyIVerdict {
    pub pass: bool,
    pub x_final: f64,
    pub epsilon: f64,
    /// Divergence of `Σ α_n` as decided from the schedule family.
    pub alpha_series: SeriesBehavior,
    pub k_hat: f64,
    pub k_hat_warning: bool,
    /// `|x_N - (K̂^N x_0 + Σ K̂^{N-1-i} [(1 - α_i - K̂) x_i + ω_i])|`
    pub unrolled_residual: f64,
    /// `Σ_{i<N} K̂^{N-1-i} [ω_i - (K̂ + α_i - 1) x_i]`
    pub weighted_sum: f64,
    /// `-K̂^N x_0`, the lower bound on `weighted_sum`.
    pub weighted_sum_floor: f64,
}

/// Convergence to zero without drift terms (`σ = 0`, `γ ≡ 0`).
pub fn verify_property_i(t: &VenterTrace, cfg: &VenterConfig, epsilon: f64) -> Result<PropertyIVerdict, VenterError> {
    check_same_run(t, cfg)?;
    if cfg.sigma != 0.0 {
        return Err(VenterError::HypothesisViolated(format!("sigma = {} must be 0", cfg.sigma)));
    }
    if let Some(n) = t.gamma.iter().position(|&g| g != 0.0) {
        return Err(VenterError::HypothesisViolated(format!("gamma_{n} = {} must be 0", t.gamma[n])));
    }
    let n = t.steps();
    let k = t.final_k_hat();
    let mut acc = cfg.x0;
    let mut weighted = 0.0;
    for i in 0..n {
        let term = (1.0 - t.alpha[i] - k) * t.x[i] + t.omega[i];
        acc = k * acc + term;
        weighted = k * weighted + term;
    }
    let x_final = t.x[n];
    Ok(PropertyIVerdict {
        pass: x_final < epsilon,
        x_final,
        epsilon,
        alpha_series: cfg.alpha.series_behavior(),
        k_hat: k,
        k_hat_warning: k > K_HAT_WARNING,
        unrolled_residual: (x_final - acc).abs(),
        weighted_sum: weighted,
        weighted_sum_floor: -k.powi(n as i32) * cfg.x0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityVerdict {
    pub pass: bool,
    /// Worst `|Σ(α_i - γ_i)x_i + x_N - x_0 - Σω_i| / (1 + x_0 + Σω_i)` over all `N`.
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub sum_gap_x: f64,
    pub sum_alpha_x: f64,
    /// Reported without a verdict.
    pub sum_x: f64,
}

/// Tolerance of the telescoping identity check.
pub const TELESCOPING_TOL: f64 = 1e-10;

/// Checks `Σ_{i<N} (α_i - γ_i) x_i + x_N = x_0 + Σ_{i<N} ω_i` for every `N`.
pub fn verify_summability(t: &VenterTrace, cfg: &VenterConfig) -> Result<SummabilityVerdict, VenterError> {
    check_same_run(t, cfg)?;
    if cfg.sigma != 0.0 {
        return Err(VenterError::HypothesisViolated(format!("sigma = {} must be 0", cfg.sigma)));
    }
    let n = t.steps();
    let scale = 1.0 + cfg.x0 + t.sum_omega[n - 1];
    let max_relative_error = (0..n)
        .map(|i| {
            let lhs = t.sum_gap_x[i] + t.x[i + 1];
            let rhs = cfg.x0 + t.sum_omega[i];
            (lhs - rhs).abs() / scale
        })
        .fold(0.0, f64::max);
    Ok(SummabilityVerdict {
        pass: max_relative_error <= TELESCOPING_TOL,
        max_relative_error,
        tolerance: TELESCOPING_TOL,
        sum_gap_x: t.sum_gap_x[n - 1],
        sum_alpha_x: t.sum_alpha_x[n - 1],
        sum_x: t.sum_x[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyIVVerdict {
    pub pass: bool,
    pub sup_x: f64,
    pub bound: f64,
    /// `bound - sup_x`
    pub margin: f64,
    pub inf_gap: f64,
    pub k_hat: f64,
}

/// Slack allowed on the uniform bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Uniform bound `sup x_n ≤ ((1 - K̂) x_0 + σ + sup ω) / inf (α_n - γ_n)`.
pub fn verify_property_iv(t: &VenterTrace, cfg: &VenterConfig) -> Result<PropertyIVVerdict, VenterError> {
    check_same_run(t, cfg)?;
    let inf_gap = t
        .alpha
        .iter()
        .zip(&t.gamma)
        .map(|(a, g)| a - g)
        .fold(f64::INFINITY, f64::min);
    if !(inf_gap > 0.0) {
        return Err(VenterError::HypothesisViolated(format!("inf (alpha_n - gamma_n) = {inf_gap} must be positive")));
    }
    let k = t.final_k_hat();
    let sup_omega = t.omega.iter().copied().fold(0.0, f64::max);
    let bound = ((1.0 - k) * cfg.x0 + cfg.sigma + sup_omega) / inf_gap;
    let sup_x = t.sup_x();
    let margin = bound - sup_x;
    Ok(PropertyIVVerdict { pass: margin >= -BOUND_SLACK, sup_x, bound, margin, inf_gap, k_hat: k })
}
