//! Runs a validated experiment and produces its CSV table and report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::config::{AitkenExperiment, Experiment, ExperimentConfig, JungckExperiment, ToleranceSection, VenterExperiment};
use super::output::{format_number, trace_table, Report, Table};
use crate::aitken::{self, AitkenError};
use crate::diagnostics::{self, ConvergenceReport, LimitMethod};
use crate::engine::{self, EngineError};
use crate::model::SeriesBehavior;
use crate::scan::{self, ScanParams};
use crate::stability::{self, StabilityOptions};
use crate::venter::{self, VenterError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Venter(#[from] VenterError),
    #[error(transparent)]
    Aitken(#[from] AitkenError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Table and report of one experiment, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub report: Report,
}

impl Outcome {
    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            1
        }
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut report = Report::default();
    report.info(format!("scenario {}", cfg.scenario));
    let table = match &cfg.experiment {
        Experiment::Jungck(j) => run_jungck(j, &cfg.tolerances, &mut report)?,
        Experiment::Venter(v) => run_venter(v, &mut report)?,
        Experiment::Aitken(a) => run_aitken(a, &cfg.tolerances, &mut report)?,
        Experiment::Scan(p) => run_scan(p, &cfg.tolerances, &mut report),
    };
    Ok(Outcome { table, report })
}

/// Runs `cfg` and writes the trace CSV and report into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<(Outcome, PathBuf, PathBuf), RunError> {
    let outcome = execute(cfg)?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let trace_path = dir.join(&cfg.trace_file);
    let report_path = dir.join(&cfg.report_file);
    fs::write(&trace_path, outcome.table.to_csv()).map_err(io_err(&trace_path))?;
    fs::write(&report_path, outcome.report.to_string()).map_err(io_err(&report_path))?;
    Ok((outcome, trace_path, report_path))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| format_number(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn run_jungck(j: &JungckExperiment, tol: &ToleranceSection, report: &mut Report) -> Result<Table, RunError> {
    let cfg = &j.config;
    let pair = &cfg.pair;
    report.info(format!("dim {}, steps {}, a = {}, b = {}", pair.dim(), cfg.steps, cfg.a, cfg.b));
    if let (Some(tn), Some(mu), Some(sn)) = (pair.t_norm(), pair.s_min_modulus(), pair.s_norm()) {
        report.info(format!("||T|| = {}, ||S|| = {}, mu(S) = {}", format_number(tn), format_number(sn), format_number(mu)));
    }

    let trace = engine::run(cfg)?;
    match &trace.halt {
        Some(e) => report.info(format!("run halted after {} rows: {e}", trace.len())),
        None => report.info(format!("run completed with {} rows", trace.len())),
    }

    let worst = engine::max_relative_identity_residual(&trace);
    report.check(
        worst <= tol.check,
        format!("per-step identity residual max {} <= {}", format_number(worst), format_number(tol.check)),
    );

    if pair.is_linear() {
        let opts = StabilityOptions { horizon: j.horizon, tail_start: j.tail_start, tail_tol: tol.tail };
        match stability::assess(cfg, &opts) {
            Ok(rep) => {
                for c in rep.certificates() {
                    report.info(format!(
                        "property {} {} with margin {}",
                        c.property,
                        if c.applies { "certified" } else { "not certified" },
                        format_number(c.margin)
                    ));
                }
                report.info(format!("predicted behaviour: {}", rep.predicted));
                if let Ok(checked) = stability::cross_validate(&rep, &trace) {
                    if let Some(agrees) = checked.simulation_agrees {
                        report.check(agrees, format!("simulation agrees with certificates ({})", checked.validation_notes.join("; ")));
                    }
                }
            }
            Err(e) => report.info(format!("certificates unavailable: {e}")),
        }
        if let Ok(g) = stability::check_global_stability(cfg, j.horizon, tol.tail, Some(&trace), None) {
            report.info(format!(
                "positivity conditions: b condition {}, a condition {}, S^-1 >= 0 and T >= 0 {}",
                g.b_condition(),
                g.a_condition(),
                g.positivity()
            ));
        }
    }

    jungck_limits(&trace, tol, report);
    Ok(trace_table(&trace))
}

fn jungck_limits(trace: &crate::trace::IterationTrace, tol: &ToleranceSection, report: &mut Report) {
    let sz = trace.sz();
    let sy = trace.sy();
    let (conv_z, conv_y) = match (
        ConvergenceReport::analyze(&sz, &trace.accel_z, tol.equivalence),
        ConvergenceReport::analyze(&sy, &trace.accel_y, tol.equivalence),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            report.info(format!("limit diagnostics skipped: {e}"));
            return;
        }
    };
    let converged = |c: &ConvergenceReport| c.estimated_limit.method == LimitMethod::LastTerm;
    for (name, c) in [("Sz", &conv_z), ("Sy", &conv_y)] {
        report.info(format!(
            "estimated ({name})* = {} by {}",
            fmt_vec(c.estimated_limit.value.as_slice()),
            if converged(c) { "last term" } else { "extrapolation" }
        ));
        if let Some(last) = c.acceleration.last() {
            report.info(format!("acceleration ratio for {name} at n = {}: {}", last.index, format_number(last.ratio)));
        }
        let msg = format!("accelerated {name} shares the raw limit within {}", format_number(tol.equivalence));
        match c.equivalent {
            Some(eq) if converged(c) => report.check(eq, msg),
            Some(eq) => report.info(format!("{msg}: {eq}")),
            None => {}
        }
    }

    if let Ok(res) = diagnostics::limit_identity_residuals(trace) {
        let scale = 1.0 + conv_z.estimated_limit.value.norm();
        let last = res.last().copied().unwrap_or(0.0) / scale;
        let msg = format!("limit identity residual at the last row {} <= {}", format_number(last), format_number(tol.equivalence));
        if converged(&conv_z) && converged(&conv_y) {
            report.check(last <= tol.equivalence, msg);
        } else {
            report.info(msg);
        }
    }
}

fn run_venter(v: &VenterExperiment, report: &mut Report) -> Result<Table, RunError> {
    let cfg = &v.config;
    report.info(format!(
        "alpha = {}, gamma = {}, omega = {}, sigma = {}, x0 = {}, steps = {}",
        cfg.alpha,
        cfg.gamma,
        cfg.omega,
        format_number(cfg.sigma),
        format_number(cfg.x0),
        cfg.steps
    ));
    let t = venter::venter_run(cfg)?;
    let k = t.final_k_hat();
    report.info(format!("K_hat = {}", format_number(k)));
    if k > venter::K_HAT_WARNING {
        report.info(format!("K_hat exceeds {}: finite-horizon bounds are loose", venter::K_HAT_WARNING));
    }
    report.check(t.x.iter().all(|&x| x >= 0.0), "iterates stay nonnegative");
    report.info(format!("sup x_n = {}, x_N = {}", format_number(t.sup_x()), format_number(t.x[t.steps()])));

    match venter::verify_summability(&t, cfg) {
        Ok(s) => report.check(
            s.pass,
            format!(
                "telescoping identity max relative error {} <= {}; sum (alpha - gamma) x = {}, sum x = {}",
                format_number(s.max_relative_error),
                format_number(s.tolerance),
                format_number(s.sum_gap_x),
                format_number(s.sum_x)
            ),
        ),
        Err(e) => report.info(format!("telescoping identity skipped: {e}")),
    }

    match venter::verify_property_i(&t, cfg, v.epsilon) {
        Ok(p) => {
            let msg = format!(
                "x_N = {} < epsilon = {} (alpha series {})",
                format_number(p.x_final),
                format_number(p.epsilon),
                p.alpha_series
            );
            if p.alpha_series == SeriesBehavior::Divergent {
                report.check(p.pass, msg);
            } else {
                report.info(format!("{msg}: divergence hypothesis not met, {}", if p.pass { "holds" } else { "does not hold" }));
            }
        }
        Err(e) => report.info(format!("convergence check skipped: {e}")),
    }

    match venter::verify_property_iv(&t, cfg) {
        Ok(p) => report.check(
            p.pass,
            format!(
                "uniform bound sup x_n = {} <= {} (margin {})",
                format_number(p.sup_x),
                format_number(p.bound),
                format_number(p.margin)
            ),
        ),
        Err(e) => report.info(format!("uniform bound skipped: {e}")),
    }

    let header = ["n", "alpha", "gamma", "omega", "x", "k_hat", "sum_alpha_x", "sum_gap_x", "sum_omega", "sum_x"];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect());
    let n = t.steps();
    for i in 0..=n {
        let per = |v: &Vec<f64>| (i < n).then(|| v[i]);
        table.push(vec![
            Some(i as f64),
            per(&t.alpha),
            per(&t.gamma),
            per(&t.omega),
            Some(t.x[i]),
            per(&t.k_hat),
            per(&t.sum_alpha_x),
            per(&t.sum_gap_x),
            per(&t.sum_omega),
            per(&t.sum_x),
        ]);
    }
    Ok(table)
}

fn run_aitken(a: &AitkenExperiment, tol: &ToleranceSection, report: &mut Report) -> Result<Table, RunError> {
    let seq = &a.sequence;
    let d = seq[0].dim();
    let acc = aitken::accelerate_sequence(seq, &a.gates, tol.floor)?;
    report.info(format!("{} terms of dimension {d}", seq.len()));

    let finite = acc.values.iter().all(|v| v.iter().all(|x| x.is_finite()));
    report.check(finite, "accelerated terms are finite");
    let passthrough = acc.values.iter().zip(&acc.gates).enumerate().all(|(k, (v, g))| {
        (0..d).all(|i| g[i] || v[i].to_bits() == seq[k][i].to_bits())
    });
    report.check(passthrough, "gated-off components equal the input term");
    let off = acc.gates.iter().flatten().filter(|&&g| !g).count();
    report.info(format!("{off} of {} components gated off", acc.gates.len() * d));

    let limit = match &a.limit {
        Some(l) => Some(l.clone()),
        None => match diagnostics::estimate_limit(seq) {
            Ok(e) => Some(e.value),
            Err(e) => {
                report.info(format!("limit unavailable: {e}"));
                None
            }
        },
    };
    let mut ratios = vec![None; acc.values.len()];
    if let Some(l) = &limit {
        report.info(format!("limit {}", fmt_vec(l.as_slice())));
        if let Ok(rs) = diagnostics::acceleration_ratio(seq, &acc.values, l) {
            for r in &rs {
                ratios[r.index] = Some(r.ratio);
            }
            if let (Some(first), Some(last)) = (rs.first(), rs.last()) {
                report.info(format!(
                    "acceleration ratio {} at n = {}, {} at n = {}",
                    format_number(first.ratio),
                    first.index,
                    format_number(last.ratio),
                    last.index
                ));
            }
        }
    }

    let mut header = vec!["n".to_string()];
    header.extend((0..d).map(|i| format!("s[{i}]")));
    header.extend((0..d).map(|i| format!("As[{i}]")));
    header.extend((0..d).map(|i| format!("gate[{i}]")));
    header.push("ratio".into());
    let mut table = Table::new(header);
    for (n, s) in seq.iter().enumerate() {
        let mut row = vec![Some(n as f64)];
        row.extend(s.iter().map(|&x| Some(x)));
        row.extend((0..d).map(|i| acc.values.get(n).map(|v| v[i])));
        row.extend((0..d).map(|i| acc.gates.get(n).map(|g| if g[i] { 1.0 } else { 0.0 })));
        row.push(ratios.get(n).copied().flatten());
        table.push(row);
    }
    Ok(table)
}

fn run_scan(p: &ScanParams, tol: &ToleranceSection, report: &mut Report) -> Table {
    report.info(format!(
        "{} configs, seed {}, dim {}, steps {}, ||T|| <= {}, mu(S) >= {}",
        p.count,
        p.seed,
        p.dim,
        p.steps,
        format_number(p.t_norm_max),
        format_number(p.s_min_modulus_min)
    ));
    let entries = scan::run_scan(p);
    let bounded = entries.iter().filter(|e| e.applies[..3].iter().any(|&a| a)).count();
    let zero = entries.iter().filter(|e| e.applies[3] || e.applies[4]).count();
    let none = entries.iter().filter(|e| !e.applies.iter().any(|&a| a)).count();
    report.info(format!("bounded certified {bounded}, zero-limit certified {zero}, uncertified {none}"));
    for (i, name) in ["i", "ii", "iii", "iv", "v"].iter().enumerate() {
        report.info(format!("property ({name}) certified in {} configs", entries.iter().filter(|e| e.applies[i]).count()));
    }
    let violations: Vec<usize> = entries.iter().filter(|e| e.soundness_violation).map(|e| e.index).collect();
    report.check(violations.is_empty(), format!("soundness violations: {} {:?}", violations.len(), violations));
    let worst = entries.iter().map(|e| e.max_identity_residual).fold(0.0, f64::max);
    report.check(
        worst <= tol.check,
        format!("per-step identity residual max {} <= {}", format_number(worst), format_number(tol.check)),
    );

    let header = [
        "index", "t_norm", "s_min_modulus", "s_norm", "i", "ii", "iii", "iv", "v", "max_growth", "final_ratio", "halted",
    ];
    let mut table = Table::new(header.iter().map(|s| s.to_string()).collect());
    let flag = |b: bool| Some(if b { 1.0 } else { 0.0 });
    for e in &entries {
        let mut row = vec![Some(e.index as f64), Some(e.t_norm), Some(e.s_min_modulus), Some(e.s_norm)];
        row.extend(e.applies.iter().map(|&a| flag(a)));
        row.extend([Some(e.max_growth), Some(e.final_ratio).filter(|r| r.is_finite()), flag(e.halted)]);
        table.push(row);
    }
    table
}
