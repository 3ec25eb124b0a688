//! User-facing runner: built-in experiments, CSV output and checks.

pub mod csv_out;
pub mod experiments;
pub mod sweep;

use std::path::Path;

use crate::engine::{run, MetricsLog, RunError};
use crate::scenario::{parse_with_overrides, to_ini, ConfigError, Scenario};
pub use csv_out::{emit_csv, read_packets_csv, summarize, Summary};
pub use experiments::{find, Check, Experiment, EXPERIMENTS};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot read scenario `{path}`: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write output: {0}")]
    Write(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Write(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub scenario: Scenario,
    pub log: MetricsLog,
    pub summary: Option<Summary>,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Scenario text for a registered name, or the contents of a file.
pub fn load_text(target: &str) -> Result<String, HarnessError> {
    if let Some(e) = find(target) {
        return Ok(e.ini.to_string());
    }
    std::fs::read_to_string(target).map_err(|source| HarnessError::Read { path: target.to_string(), source })
}

pub fn load(target: &str, seed: Option<u64>, overrides: &[String]) -> Result<Scenario, HarnessError> {
    let mut sc = parse_with_overrides(&load_text(target)?, overrides)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    Ok(sc)
}

/// Mean outage duration of the baseline across `seeds`; `None` entries are
/// seeds that did not show exactly one outage.
pub fn nosync_outages(sc: &Scenario, seeds: &[u64]) -> Vec<Option<f64>> {
    sweep::sweep(seeds, |seed| {
        let mut s = sc.clone();
        s.seed = seed;
        let log = run(&s).ok()?;
        match log.outages.as_slice() {
            [o] => Some(o.duration()),
            _ => None,
        }
    })
}

/// Built-in checks for the experiment named like the scenario, if any.
pub fn evaluate(sc: &Scenario, log: &MetricsLog, summary: Option<&Summary>) -> Vec<Check> {
    let s = summary.copied().unwrap_or_default();
    match sc.name.as_str() {
        "handover-sync" => experiments::check_handover_sync(log, sc, &s),
        "handover-nosync" => {
            let mut c = experiments::check_handover_nosync(log);
            let seeds: Vec<u64> = (sc.seed..sc.seed + experiments::NOSYNC_SEEDS).collect();
            c.push(experiments::check_nosync_mean(&nosync_outages(sc, &seeds)));
            c
        }
        "handover-300ms" => experiments::check_handover_300ms(&s, log),
        "scale-100" => experiments::check_scale(log, sc),
        _ => Vec::new(),
    }
}

/// Runs `target`, writes its artifacts under `out` and evaluates its checks.
pub fn run_experiment(target: &str, seed: Option<u64>, overrides: &[String], out: &Path) -> Result<Outcome, HarnessError> {
    let scenario = load(target, seed, overrides)?;
    let log = run(&scenario)?;
    let summary = emit_csv(out, &log, &to_ini(&scenario))?;
    let checks = evaluate(&scenario, &log, summary.as_ref());
    Ok(Outcome { scenario, log, summary, checks })
}
