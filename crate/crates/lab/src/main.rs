use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use orbitmatch::record::Report;
use orbitmatch::{example_config, run, verify, ExperimentConfig, Kind, LabError, RunOptions};

/// Exit code for config, I/O and record errors.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "orbitmatch",
    version,
    about = "Recurrence-statistics experiments on symbolic systems and interval maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Compute at most this many missing cells.
        #[arg(long)]
        max_cells: Option<usize>,
    },
    /// Re-evaluate a finished record against its target.
    Verify {
        record: PathBuf,
        /// Overrides the tolerance stored in the config.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// List experiment kinds.
    ListKinds,
    /// Print the shipped example config for a kind.
    PrintExampleConfig { kind: String },
}

fn summary(report: &Report) -> String {
    let ev = &report.evaluation;
    let value = ev.value.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    let mut s = format!(
        "{} [{}] {:?}: {} = {} (target {:.6} ± {}), cells {}/{}",
        report.experiment,
        report.kind,
        report.status,
        ev.statistic,
        value,
        ev.target,
        ev.tolerance,
        report.cells_present,
        report.cells_total
    );
    if let Some(note) = &ev.note {
        s.push_str(&format!("; {note}"));
    }
    s
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, max_cells } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(format!("{}: {e}", config.display())),
            };
            let cfg = match ExperimentConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => return fail(format!("{}: {e}", config.display())),
            };
            let Some(out) = out.or_else(|| cfg.output.clone()) else {
                return fail("no output directory: pass --out or set `output` in [experiment]");
            };
            let mut opts = match RunOptions::from_env() {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            opts.max_new_cells = max_cells;
            match run(&cfg, &out, &opts) {
                Ok(outcome) => {
                    for e in &outcome.report.cell_errors {
                        eprintln!("cell n={} replicate={} failed: {}", e.n, e.replicate, e.error);
                    }
                    println!("{}", summary(&outcome.report));
                    println!(
                        "computed {} cells, reused {}; record in {}",
                        outcome.computed,
                        outcome.reused,
                        out.display()
                    );
                    ExitCode::from(outcome.report.status.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { record, tolerance } => match verify(&record, tolerance) {
            Ok(v) => {
                println!("{}", summary(&v.report));
                ExitCode::from(v.report.status.exit_code() as u8)
            }
            Err(e @ LabError::Config(_)) => fail(format!("{}: {e}", record.display())),
            Err(e) => fail(e),
        },
        Command::ListKinds => {
            for k in Kind::ALL {
                println!("{:<16} n = {:<25} {}", k.name(), k.grid_meaning(), k.description());
            }
            ExitCode::SUCCESS
        }
        Command::PrintExampleConfig { kind } => match Kind::parse(&kind) {
            Some(k) => {
                print!("{}", example_config(k));
                ExitCode::SUCCESS
            }
            None => fail(format!("unknown kind `{kind}`; see list-kinds")),
        },
    }
}
