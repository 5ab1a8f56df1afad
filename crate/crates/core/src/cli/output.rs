//! CSV tables and the plain-text check report.

use std::fmt::{self, Write as _};

use crate::engine;
use crate::trace::IterationTrace;

/// Shortest round-trip decimal: plain notation for `1e-5 ≤ |x| < 1e16` and
/// zero, exponent notation otherwise.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// A CSV table built in memory. Absent cells are written empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(format_number).unwrap_or_default()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn columns(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..d).map(move |i| format!("{prefix}[{i}]"))
}

fn vals(v: Option<&[f64]>, d: usize) -> impl Iterator<Item = Option<f64>> + '_ {
    (0..d).map(move |i| v.map(|v| v[i]))
}

fn bits(v: Option<&Vec<bool>>, d: usize) -> impl Iterator<Item = Option<f64>> + '_ {
    (0..d).map(move |i| v.map(|g| if g[i] { 1.0 } else { 0.0 }))
}

/// One row per iteration index with iterates, images, Aitken values, gates
/// and the per-step identity residual.
pub fn trace_table(trace: &IterationTrace) -> Table {
    let d = trace.dim();
    let mut header = vec!["n".to_string()];
    for p in ["z", "y", "Sz", "Sy", "ASz", "ASy", "gate_z", "gate_y"] {
        header.extend(columns(p, d));
    }
    header.push("identity_residual".into());

    let mut table = Table::new(header);
    for (n, r) in trace.rows.iter().enumerate() {
        let mut row = vec![Some(n as f64)];
        row.extend(vals(Some(r.z.as_slice()), d));
        row.extend(vals(Some(r.y.as_slice()), d));
        row.extend(vals(Some(r.sz.as_slice()), d));
        row.extend(vals(Some(r.sy.as_slice()), d));
        row.extend(vals(trace.accel_z.get(n).map(|v| v.as_slice()), d));
        row.extend(vals(trace.accel_y.get(n).map(|v| v.as_slice()), d));
        row.extend(bits(trace.gates_z.get(n), d));
        row.extend(bits(trace.gates_y.get(n), d));
        row.push(engine::identity_residual(trace, n).ok());
        table.push(row);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Info,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        })
    }
}

/// Check results, one line each, prefixed with their status.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub lines: Vec<(Status, String)>,
}

impl Report {
    pub fn info(&mut self, msg: impl Into<String>) {
        self.lines.push((Status::Info, msg.into()));
    }

    pub fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.lines.push((if ok { Status::Pass } else { Status::Fail }, msg.into()));
    }

    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|(s, _)| *s == Status::Fail).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (status, msg) in &self.lines {
            writeln!(s, "{status} {msg}")?;
        }
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-7, -2.5e20, 123456.789, f64::MIN_POSITIVE, f64::MAX, 5e-324] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(format_number(0.4375), "0.4375");
        assert_eq!(format_number(1e-7), "1e-7");
        assert_eq!(format_number(2.0), "2");
    }

    #[test]
    fn table_leaves_absent_cells_empty() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![Some(1.0), None]);
        assert_eq!(t.to_csv(), "a,b\n1,\n");
    }

    #[test]
    fn report_lines() {
        let mut r = Report::default();
        r.check(true, "one");
        r.info("two");
        r.check(false, "three");
        assert_eq!(r.to_string(), "PASS one\nINFO two\nFAIL three\n");
        assert_eq!(r.failures(), 1);
    }
}
