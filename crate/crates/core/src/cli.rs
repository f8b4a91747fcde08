//! Command-line front end: validate, single-run with assertions, and batch
//! execution over a scenario directory.
//!
//! Exit codes: 0 all assertions pass, 1 assertion failure, 2 usage or
//! validation error, 3 engine error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::engine::{self, RunOutput};
use crate::report::{self, Evaluation};
use crate::scenario::{self, ScenarioSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

#[derive(Parser)]
#[command(
    name = "olsrv2-sim",
    about = "Deterministic OLSRv2 simulator with a routing-attack scenario harness"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, evaluate its assertions, write the report.
    Run {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the JSON report here (default: <scenario stem>.report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run every `*.json` scenario in a directory and summarize.
    Batch { dir: PathBuf },
    /// Load and validate a scenario, printing what was checked.
    Validate { scenario: PathBuf },
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output with code 0.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, seed, log, report } => cmd_run(&scenario, seed, log, report),
        Command::Batch { dir } => cmd_batch(&dir),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

fn load(path: &Path) -> Result<ScenarioSpec, i32> {
    match scenario::load_scenario(path) {
        Ok(spec) => Ok(spec),
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_USAGE)
        }
    }
}

/// Run a spec plus its paired baseline (when declared), then evaluate.
pub fn run_and_assert(
    spec: &ScenarioSpec,
    spec_path: &Path,
) -> Result<(RunOutput, Evaluation), String> {
    let baseline_run = match &spec.baseline {
        Some(rel) => {
            let path = scenario::baseline_path(spec_path, rel);
            let base_spec = scenario::load_scenario(&path)
                .map_err(|e| format!("baseline `{}`: {e}", path.display()))?;
            Some(engine::run(&base_spec).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    let run = engine::run(spec).map_err(|e| e.to_string())?;
    let eval = report::evaluate(spec, &run, baseline_run.as_ref());
    Ok((run, eval))
}

fn cmd_run(path: &Path, seed: Option<u64>, log: Option<PathBuf>, report_to: Option<PathBuf>) -> i32 {
    let mut spec = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (run, eval) = match run_and_assert(&spec, path) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("engine error: {e}");
            return EXIT_ENGINE;
        }
    };
    if let Some(log_path) = log {
        if let Err(e) = std::fs::write(&log_path, run.render_log()) {
            eprintln!("cannot write log {}: {e}", log_path.display());
            return EXIT_ENGINE;
        }
    }
    let report_path = report_to.unwrap_or_else(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        PathBuf::from(format!("{stem}.report.json"))
    });
    let pretty = serde_json::to_string_pretty(&eval.report).expect("report is serializable");
    if let Err(e) = std::fs::write(&report_path, pretty) {
        eprintln!("cannot write report {}: {e}", report_path.display());
        return EXIT_ENGINE;
    }

    println!("scenario {} (seed {})", spec.name, spec.seed);
    for o in &eval.outcomes {
        println!(
            "  [{}] {}: observed {} expected {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.observed,
            o.expected
        );
    }
    println!(
        "{} of {} assertions passed; report: {}",
        eval.outcomes.iter().filter(|o| o.pass).count(),
        eval.outcomes.len(),
        report_path.display()
    );
    if eval.all_passed() {
        EXIT_PASS
    } else {
        EXIT_ASSERTION_FAILURE
    }
}

fn cmd_batch(dir: &Path) -> i32 {
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
            .collect(),
        Err(e) => {
            eprintln!("cannot read {}: {e}", dir.display());
            return EXIT_USAGE;
        }
    };
    paths.sort();
    if paths.is_empty() {
        eprintln!("no scenarios in {}", dir.display());
        return EXIT_USAGE;
    }

    let results: Vec<(PathBuf, Result<(usize, usize), String>)> = paths
        .par_iter()
        .map(|p| {
            let outcome = scenario::load_scenario(p)
                .map_err(|e| e.to_string())
                .and_then(|spec| {
                    run_and_assert(&spec, p).map(|(_, eval)| {
                        (
                            eval.outcomes.iter().filter(|o| o.pass).count(),
                            eval.outcomes.len(),
                        )
                    })
                });
            (p.clone(), outcome)
        })
        .collect();

    let mut failures = 0;
    println!("{:<44} {:>10} result", "scenario", "assertions");
    for (path, result) in &results {
        let name = path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("?")
            .to_string();
        match result {
            Ok((pass, total)) if pass == total => {
                println!("{name:<44} {:>7}/{:<2} PASS", pass, total)
            }
            Ok((pass, total)) => {
                failures += 1;
                println!("{name:<44} {:>7}/{:<2} FAIL", pass, total)
            }
            Err(e) => {
                failures += 1;
                println!("{name:<44} {:>10} ERROR {e}", "-")
            }
        }
    }
    println!(
        "{} scenarios, {} failing",
        results.len(),
        failures
    );
    if failures == 0 {
        EXIT_PASS
    } else {
        EXIT_ASSERTION_FAILURE
    }
}

fn cmd_validate(path: &Path) -> i32 {
    match load(path) {
        Ok(spec) => {
            println!(
                "ok: {} ({} nodes, {} links, {} probes, {} assertions, duration {} s)",
                spec.name,
                spec.nodes.len(),
                spec.links.len(),
                spec.probes.len(),
                spec.assertions.len(),
                spec.duration
            );
            EXIT_PASS
        }
        Err(code) => code,
    }
}
