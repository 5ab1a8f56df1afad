use std::fs;
use std::path::PathBuf;
use std::process::Command;

use aitken_jungck::cli::{execute, load_config, parse_config, Overrides, Status};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aitken-jungck"))
}

#[test]
fn shipped_configs_pass() {
    let overrides = Overrides { steps: Some(100), ..Overrides::default() };
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            // the scan is shortened; the others run as shipped
            let o = if text.contains("[scan]") { overrides.clone() } else { Overrides::default() };
            let cfg = load_config(&text, &o).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let out = execute(&cfg).unwrap();
            assert!(out.report.passed(), "{}:\n{}", path.display(), out.report);
        }
    }
}

#[test]
fn binary_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["--config", configs_dir().join("scalar.toml").to_str().unwrap(), "--quiet", "--output"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("n,z[0],y[0],Sz[0],Sy[0],ASz[0],ASy[0],gate_z[0],gate_y[0],identity_residual\n"));
    assert_eq!(csv.lines().count(), 51);
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.lines().all(|l| l.starts_with("PASS ") || l.starts_with("INFO ")));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[jungck]\nsteps = 3\nunknown = 1\n").unwrap();
    let out = bin().arg("--config").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    assert_eq!(bin().arg("--no-such-flag").output().unwrap().status.code(), Some(2));

    // too few steps for the requested epsilon: a check fails
    let out = bin()
        .arg("--config")
        .arg(configs_dir().join("venter.toml"))
        .args(["--steps", "10", "--quiet", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn absent_cells_are_empty() {
    let cfg = parse_config("[jungck]\nsteps = 4\nz0 = 1.0\nS = 2.0e0\nT = [[0.5]]\na = 0.5\nb = 0.5\n");
    // a bare number is not a matrix
    assert!(cfg.is_err());
    let cfg = parse_config("[jungck]\nsteps = 4\nz0 = 1.0\nS = [[2.0]]\nT = [[0.5]]\na = 0.5\nb = 0.5\n").unwrap();
    let csv = execute(&cfg).unwrap().table.to_csv();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    // Aitken columns exist for the first two rows only, the residual for the first three
    assert!(!rows[1][5].is_empty() && rows[2][5].is_empty());
    assert!(!rows[2][9].is_empty() && rows[3][9].is_empty());
}

#[test]
fn aitken_scenario_table() {
    let cfg = parse_config("[aitken]\nsequence = [[1.0, 5.0], [0.5, 5.0], [0.25, 5.0], [0.125, 5.0]]\nlimit = [0.0, 5.0]\n").unwrap();
    let out = execute(&cfg).unwrap();
    assert!(out.report.passed());
    let csv = out.table.to_csv();
    let first_row = csv.lines().nth(1).unwrap();
    // component 0 is exact geometric, component 1 is constant and gated off
    assert_eq!(first_row, "0,1,5,0,5,1,0,0");
    assert!(out.report.lines.iter().any(|(s, m)| *s == Status::Info && m.contains("2 of 4 components gated off")));
}
