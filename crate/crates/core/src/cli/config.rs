//! TOML experiment configuration: raw file layout, overrides and validation.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::engine::{JungckConfig, PowerMode};
use crate::model::{Domain, GatePolicy, Operator, OperatorPair, Schedule, ScheduleForm, StateVector};
use crate::scan::ScanParams;
use crate::venter::VenterConfig;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{field}: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    fn new(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ValidationError { field: field.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid config: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Jungck,
    Venter,
    AitkenOnly,
    StabilityScan,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Jungck => "jungck",
            Scenario::Venter => "venter",
            Scenario::AitkenOnly => "aitken-only",
            Scenario::StabilityScan => "stability-scan",
        }
    }

    fn section(self) -> &'static str {
        match self {
            Scenario::Jungck => "jungck",
            Scenario::Venter => "venter",
            Scenario::AitkenOnly => "aitken",
            Scenario::StabilityScan => "scan",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jungck" => Ok(Scenario::Jungck),
            "venter" => Ok(Scenario::Venter),
            "aitken-only" => Ok(Scenario::AitkenOnly),
            "stability-scan" => Ok(Scenario::StabilityScan),
            other => Err(ValidationError::new(
                "scenario",
                format!("unknown scenario `{other}`, expected jungck, venter, aitken-only or stability-scan"),
            )),
        }
    }
}

// ---- raw file layout ----

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Option<String>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    pub jungck: Option<JungckSection>,
    pub venter: Option<VenterSection>,
    pub aitken: Option<AitkenSection>,
    pub scan: Option<ScanSection>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: Option<String>,
    pub report: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    /// Relative tolerance for pass/fail checks.
    pub check: f64,
    pub solver: f64,
    /// Aitken denominator floor.
    pub floor: f64,
    /// Distance to 1 accepted on a schedule tail.
    pub tail: f64,
    pub equivalence: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection { check: 1e-9, solver: 1e-12, floor: 1e-12, tail: 0.01, equivalence: 1e-6 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Entries(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Name(String),
    Rows(Vec<Vec<f64>>),
    Builtin(BuiltinOperator),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinOperator {
    pub kind: String,
    pub scale: Option<f64>,
    pub entries: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Constant(f64),
    Values(Vec<f64>),
    Form(ScheduleTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleTable {
    pub kind: String,
    pub c: Option<f64>,
    pub k: Option<f64>,
    pub p: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GateSpec {
    Name(String),
    Table(GateTable),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateTable {
    pub threshold: Option<f64>,
    pub list: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JungckSection {
    pub steps: usize,
    pub z0: VectorSpec,
    #[serde(rename = "S")]
    pub s: OperatorSpec,
    #[serde(rename = "T")]
    pub t: OperatorSpec,
    pub a: ScheduleSpec,
    pub b: ScheduleSpec,
    pub gates_z: Option<GateSpec>,
    pub gates_y: Option<GateSpec>,
    pub power_mode: Option<String>,
    pub domain: Option<String>,
    /// Certificate horizon; defaults to `steps`.
    pub horizon: Option<usize>,
    pub tail_start: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VenterSection {
    pub steps: usize,
    pub alpha: ScheduleSpec,
    pub gamma: Option<ScheduleSpec>,
    pub omega: Option<ScheduleSpec>,
    pub sigma: Option<f64>,
    pub x0: f64,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AitkenSection {
    pub sequence: Option<Vec<VectorSpec>>,
    pub series: Option<SeriesSpec>,
    pub gates: Option<GateSpec>,
    /// Known limit; estimated from the sequence when absent.
    pub limit: Option<VectorSpec>,
}

/// `x_n = limit + Σ c r^n` over `modes = [[c, r], ...]`, `n < len`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub limit: f64,
    pub modes: Vec<[f64; 2]>,
    pub len: usize,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub steps: Option<usize>,
    pub horizon: Option<usize>,
    pub t_norm_max: Option<f64>,
    pub s_min_modulus_min: Option<f64>,
    pub s_min_modulus_max: Option<f64>,
    pub s_condition_max: Option<f64>,
}

/// Command-line values that replace file values before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub steps: Option<usize>,
    pub tolerance: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        toml::from_str(text).map_err(|e: toml::de::Error| ParseError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.scenario {
            self.scenario = Some(s.clone());
        }
        if let Some(n) = o.steps {
            if let Some(j) = &mut self.jungck {
                j.steps = n;
            }
            if let Some(v) = &mut self.venter {
                v.steps = n;
            }
            if let Some(sc) = &mut self.scan {
                sc.steps = Some(n);
            }
            if let Some(series) = self.aitken.as_mut().and_then(|a| a.series.as_mut()) {
                series.len = n;
            }
        }
        if let Some(t) = o.tolerance {
            self.tolerances.check = t;
        }
    }

    pub fn validate(&self) -> Result<ExperimentConfig, ValidationError> {
        let present: Vec<Scenario> = [
            (Scenario::Jungck, self.jungck.is_some()),
            (Scenario::Venter, self.venter.is_some()),
            (Scenario::AitkenOnly, self.aitken.is_some()),
            (Scenario::StabilityScan, self.scan.is_some()),
        ]
        .into_iter()
        .filter_map(|(s, p)| p.then_some(s))
        .collect();
        let scenario = match present.as_slice() {
            [one] => *one,
            [] => return Err(ValidationError::new("scenario", "no scenario section ([jungck], [venter], [aitken] or [scan])")),
            many => {
                let names: Vec<_> = many.iter().map(|s| format!("[{}]", s.section())).collect();
                return Err(ValidationError::new("scenario", format!("exactly one scenario section allowed, found {}", names.join(", "))));
            }
        };
        if let Some(name) = &self.scenario {
            let requested: Scenario = name.parse()?;
            if requested != scenario {
                return Err(ValidationError::new(
                    "scenario",
                    format!("scenario `{requested}` needs a [{}] section, found [{}]", requested.section(), scenario.section()),
                ));
            }
        }

        let tol = validate_tolerances(&self.tolerances)?;
        let experiment = match scenario {
            Scenario::Jungck => Experiment::Jungck(validate_jungck(self.jungck.as_ref().expect("present"), &tol)?),
            Scenario::Venter => Experiment::Venter(validate_venter(self.venter.as_ref().expect("present"))?),
            Scenario::AitkenOnly => Experiment::Aitken(validate_aitken(self.aitken.as_ref().expect("present"), &tol)?),
            Scenario::StabilityScan => Experiment::Scan(validate_scan(self.scan.as_ref().expect("present"), &tol)?),
        };
        Ok(ExperimentConfig {
            scenario,
            trace_file: self.output.trace.clone().unwrap_or_else(|| "trace.csv".into()),
            report_file: self.output.report.clone().unwrap_or_else(|| "report.txt".into()),
            tolerances: tol,
            experiment,
        })
    }
}

/// Parses and validates `text` after applying `overrides`.
pub fn load_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut file = ConfigFile::parse(text)?;
    file.apply(overrides);
    Ok(file.validate()?)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    load_config(text, &Overrides::default())
}

// ---- validated form ----

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub trace_file: String,
    pub report_file: String,
    pub tolerances: ToleranceSection,
    pub experiment: Experiment,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    Jungck(JungckExperiment),
    Venter(VenterExperiment),
    Aitken(AitkenExperiment),
    Scan(ScanParams),
}

#[derive(Debug, Clone)]
pub struct JungckExperiment {
    pub config: JungckConfig,
    pub horizon: usize,
    pub tail_start: usize,
}

#[derive(Debug, Clone)]
pub struct VenterExperiment {
    pub config: VenterConfig,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct AitkenExperiment {
    pub sequence: Vec<StateVector>,
    pub gates: GatePolicy,
    pub limit: Option<StateVector>,
}

fn positive(field: &str, v: f64) -> Result<f64, ValidationError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ValidationError::new(field, format!("must be positive and finite, got {v}")))
    }
}

fn validate_tolerances(t: &ToleranceSection) -> Result<ToleranceSection, ValidationError> {
    Ok(ToleranceSection {
        check: positive("tolerances.check", t.check)?,
        solver: positive("tolerances.solver", t.solver)?,
        floor: positive("tolerances.floor", t.floor)?,
        tail: positive("tolerances.tail", t.tail)?,
        equivalence: positive("tolerances.equivalence", t.equivalence)?,
    })
}

fn vector(field: &str, spec: &VectorSpec) -> Result<StateVector, ValidationError> {
    let entries = match spec {
        VectorSpec::Scalar(x) => vec![*x],
        VectorSpec::Entries(v) => v.clone(),
    };
    StateVector::new(entries).map_err(|e| ValidationError::new(field, e))
}

fn operator(field: &str, spec: &OperatorSpec, dim: usize) -> Result<Operator, ValidationError> {
    let err = |e| ValidationError::new(field, e);
    let op = match spec {
        OperatorSpec::Rows(rows) => Operator::from_rows(rows).map_err(err)?,
        OperatorSpec::Name(name) => builtin(field, name, None, None, dim)?,
        OperatorSpec::Builtin(b) => builtin(field, &b.kind, b.scale, b.entries.as_deref(), dim)?,
    };
    if op.dim() != dim {
        return Err(ValidationError::new(field, format!("operator has dimension {}, z0 has {dim}", op.dim())));
    }
    Ok(op)
}

fn builtin(field: &str, kind: &str, scale: Option<f64>, entries: Option<&[f64]>, dim: usize) -> Result<Operator, ValidationError> {
    let err = |e| ValidationError::new(field, e);
    let need_scale = || scale.ok_or_else(|| ValidationError::new(field, format!("`{kind}` needs `scale`")));
    match kind {
        "identity" => Ok(Operator::identity(dim)),
        "zero" => Operator::scaled_identity(dim, 0.0).map_err(err),
        "scaled" => Operator::scaled_identity(dim, need_scale()?).map_err(err),
        "diagonal" => {
            let e = entries.ok_or_else(|| ValidationError::new(field, "`diagonal` needs `entries`"))?;
            Operator::diagonal(e).map_err(err)
        }
        other => Err(ValidationError::new(
            field,
            format!("unknown operator `{other}`, expected identity, zero, scaled, diagonal or a matrix"),
        )),
    }
}

fn schedule_form(field: &str, spec: &ScheduleSpec) -> Result<ScheduleForm, ValidationError> {
    let t = match spec {
        ScheduleSpec::Constant(c) => return Ok(ScheduleForm::Constant(*c)),
        ScheduleSpec::Values(v) => return Ok(ScheduleForm::List(v.clone())),
        ScheduleSpec::Form(t) => t,
    };
    let need = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| ValidationError::new(field, format!("schedule `{}` needs `{name}`", t.kind)))
    };
    Ok(match t.kind.as_str() {
        "constant" => ScheduleForm::Constant(need("c", t.c)?),
        "one-minus-inverse" => ScheduleForm::OneMinusInverse { k: need("k", t.k)? },
        "inverse" => ScheduleForm::Inverse { k: need("k", t.k)? },
        "inverse-power" => ScheduleForm::InversePower { k: need("k", t.k)?, p: need("p", t.p)? },
        "list" => ScheduleForm::List(
            t.values.clone().ok_or_else(|| ValidationError::new(field, "schedule `list` needs `values`"))?,
        ),
        other => {
            return Err(ValidationError::new(
                field,
                format!("unknown schedule `{other}`, expected constant, one-minus-inverse, inverse, inverse-power or list"),
            ))
        }
    })
}

fn unit_schedule(field: &str, spec: &ScheduleSpec) -> Result<Schedule, ValidationError> {
    Schedule::unit(schedule_form(field, spec)?).map_err(|e| ValidationError::new(field, e))
}

fn nonnegative_schedule(field: &str, spec: &ScheduleSpec) -> Result<Schedule, ValidationError> {
    Schedule::nonnegative(schedule_form(field, spec)?).map_err(|e| ValidationError::new(field, e))
}

fn gate(field: &str, spec: Option<&GateSpec>) -> Result<GatePolicy, ValidationError> {
    match spec {
        None => Ok(GatePolicy::AlwaysOn),
        Some(GateSpec::Name(n)) => match n.as_str() {
            "always-on" => Ok(GatePolicy::AlwaysOn),
            "always-off" => Ok(GatePolicy::AlwaysOff),
            other => Err(ValidationError::new(field, format!("unknown gate policy `{other}`, expected always-on or always-off"))),
        },
        Some(GateSpec::Table(t)) => match (t.threshold, &t.list) {
            (Some(tau), None) => GatePolicy::threshold(tau).map_err(|e| ValidationError::new(field, e)),
            (None, Some(list)) => Ok(GatePolicy::List(list.clone())),
            _ => Err(ValidationError::new(field, "give exactly one of `threshold` or `list`")),
        },
    }
}

fn validate_jungck(j: &JungckSection, tol: &ToleranceSection) -> Result<JungckExperiment, ValidationError> {
    if j.steps == 0 {
        return Err(ValidationError::new("jungck.steps", "must be positive"));
    }
    let z0 = vector("jungck.z0", &j.z0)?;
    let d = z0.dim();
    let s = operator("jungck.S", &j.s, d)?;
    let t = operator("jungck.T", &j.t, d)?;
    let pair = OperatorPair::new(s, t, tol.solver).map_err(|e| ValidationError::new("jungck.S", e))?;
    let mut cfg = JungckConfig::new(pair, unit_schedule("jungck.a", &j.a)?, unit_schedule("jungck.b", &j.b)?, z0, j.steps)
        .with_gates(gate("jungck.gates_z", j.gates_z.as_ref())?, gate("jungck.gates_y", j.gates_y.as_ref())?);
    cfg.floor = tol.floor;
    if let Some(m) = &j.power_mode {
        cfg.power_mode = match m.as_str() {
            "matrix-cached" => PowerMode::MatrixCached,
            "repeated-apply" => PowerMode::RepeatedApply,
            other => {
                return Err(ValidationError::new(
                    "jungck.power_mode",
                    format!("unknown power mode `{other}`, expected matrix-cached or repeated-apply"),
                ))
            }
        };
    }
    if let Some(dom) = &j.domain {
        cfg.domain = match dom.as_str() {
            "full" => Domain::Full,
            "nonnegative" => Domain::NonnegativeOrthant,
            other => return Err(ValidationError::new("jungck.domain", format!("unknown domain `{other}`, expected full or nonnegative"))),
        };
    }
    cfg.validate().map_err(|e| ValidationError::new("jungck", e))?;
    let horizon = j.horizon.unwrap_or(j.steps);
    let tail_start = j.tail_start.unwrap_or(0);
    Ok(JungckExperiment { config: cfg, horizon, tail_start })
}

fn validate_venter(v: &VenterSection) -> Result<VenterExperiment, ValidationError> {
    let zero = ScheduleSpec::Constant(0.0);
    let cfg = VenterConfig::new(
        nonnegative_schedule("venter.alpha", &v.alpha)?,
        nonnegative_schedule("venter.gamma", v.gamma.as_ref().unwrap_or(&zero))?,
        nonnegative_schedule("venter.omega", v.omega.as_ref().unwrap_or(&zero))?,
        v.sigma.unwrap_or(0.0),
        v.x0,
        v.steps,
    )
    .map_err(|e| ValidationError::new("venter", e))?;
    let epsilon = positive("venter.epsilon", v.epsilon.unwrap_or(1e-3))?;
    Ok(VenterExperiment { config: cfg, epsilon })
}

fn validate_aitken(a: &AitkenSection, _tol: &ToleranceSection) -> Result<AitkenExperiment, ValidationError> {
    let sequence = match (&a.sequence, &a.series) {
        (Some(seq), None) => seq
            .iter()
            .enumerate()
            .map(|(i, s)| vector(&format!("aitken.sequence[{i}]"), s))
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(series)) => (0..series.len)
            .map(|n| {
                let x = series.modes.iter().fold(series.limit, |acc, [c, r]| acc + c * r.powi(n as i32));
                StateVector::scalar(x).map_err(|e| ValidationError::new("aitken.series", e))
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(ValidationError::new("aitken", "give exactly one of `sequence` or `series`")),
    };
    if sequence.len() < 3 {
        return Err(ValidationError::new("aitken", format!("need at least 3 terms, got {}", sequence.len())));
    }
    let d = sequence[0].dim();
    if let Some(i) = sequence.iter().position(|s| s.dim() != d) {
        return Err(ValidationError::new(format!("aitken.sequence[{i}]"), format!("dimension differs from {d}")));
    }
    let limit = match (&a.limit, &a.series) {
        (Some(l), _) => Some(vector("aitken.limit", l)?),
        (None, Some(series)) => Some(StateVector::scalar(series.limit).map_err(|e| ValidationError::new("aitken.series", e))?),
        (None, None) => None,
    };
    if let Some(l) = &limit {
        if l.dim() != d {
            return Err(ValidationError::new("aitken.limit", format!("dimension {} differs from {d}", l.dim())));
        }
    }
    Ok(AitkenExperiment { sequence, gates: gate("aitken.gates", a.gates.as_ref())?, limit })
}

fn validate_scan(s: &ScanSection, tol: &ToleranceSection) -> Result<ScanParams, ValidationError> {
    let d = ScanParams::default();
    let steps = s.steps.unwrap_or(d.steps);
    let p = ScanParams {
        count: s.count.unwrap_or(d.count),
        seed: s.seed.unwrap_or(d.seed),
        dim: s.dim.unwrap_or(d.dim),
        steps,
        horizon: s.horizon.unwrap_or(steps),
        t_norm_max: positive("scan.t_norm_max", s.t_norm_max.unwrap_or(d.t_norm_max))?,
        s_min_modulus_min: positive("scan.s_min_modulus_min", s.s_min_modulus_min.unwrap_or(d.s_min_modulus_min))?,
        s_min_modulus_max: s.s_min_modulus_max.unwrap_or(d.s_min_modulus_max),
        s_condition_max: s.s_condition_max.unwrap_or(d.s_condition_max),
        tail_tol: tol.tail,
    };
    if p.count == 0 || p.dim == 0 || p.steps == 0 {
        return Err(ValidationError::new("scan", "count, dim and steps must be positive"));
    }
    if p.horizon < 10 {
        return Err(ValidationError::new("scan.horizon", "must be at least 10"));
    }
    if !(p.s_min_modulus_max >= p.s_min_modulus_min) {
        return Err(ValidationError::new("scan.s_min_modulus_max", "must be at least s_min_modulus_min"));
    }
    if !(p.s_condition_max >= 1.0) {
        return Err(ValidationError::new("scan.s_condition_max", "must be at least 1"));
    }
    Ok(p)
}
