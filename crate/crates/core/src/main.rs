use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use aitken_jungck::cli::{load_config, run_experiment, Overrides};

/// Run an iteration, recursion, acceleration or certificate-scan experiment
/// described by a TOML file.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Experiment file
    #[arg(long)]
    config: PathBuf,
    /// Directory for the trace CSV and report
    #[arg(long, default_value = ".")]
    output: PathBuf,
    /// Replace the configured number of steps
    #[arg(long)]
    steps: Option<usize>,
    /// Replace the relative tolerance of pass/fail checks
    #[arg(long)]
    tolerance: Option<f64>,
    /// jungck, venter, aitken-only or stability-scan
    #[arg(long)]
    scenario: Option<String>,
    /// Do not print the report
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if args.quiet { "error" } else { "warn" }))
        .init();

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let overrides = Overrides { scenario: args.scenario, steps: args.steps, tolerance: args.tolerance };
    let cfg = match load_config(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg, &args.output) {
        Ok((outcome, trace, report)) => {
            if !args.quiet {
                print!("{}", outcome.report);
                println!("trace written to {}", trace.display());
                println!("report written to {}", report.display());
            }
            if outcome.report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {} check(s) failed", outcome.report.failures());
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
