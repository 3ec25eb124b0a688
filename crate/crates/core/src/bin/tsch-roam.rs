use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsch_roam::harness::{run_experiment, EXPERIMENTS};

#[derive(Parser)]
#[command(name = "tsch-roam", version, about = "TSCH roaming simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in experiment or a scenario file.
    Run {
        /// Experiment name or path to an INI scenario.
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `section.key=value`, applied after the file is read.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List built-in experiments.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            for e in EXPERIMENTS {
                println!("{:<16} {}", e.name, e.about);
            }
            ExitCode::SUCCESS
        }
        Cmd::Run { target, seed, out, overrides } => match run_experiment(&target, seed, &overrides, &out) {
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
            Ok(o) => {
                if let Some(s) = &o.summary {
                    println!(
                        "{}: loss_rate={:.4} mean_rtt_s={:.4} p99_rtt_s={:.4} max_outage_s={:.2} dup_ratio={:.4}",
                        o.scenario.name, s.loss_rate, s.mean_rtt_s, s.p99_rtt_s, s.max_outage_s, s.dup_ratio
                    );
                }
                for c in &o.checks {
                    println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
                if o.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                }
            }
        },
    }
}
