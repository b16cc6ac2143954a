use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use smplab::{emit_report, run_experiment, ExperimentConfig, LabError, Scenario};

#[derive(Parser)]
#[command(name = "smplab", version, about = "Strong maximum principle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write report.json plus CSV artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the scenario names.
    List,
    /// Parse a config and resolve its defaults without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<bool, LabError> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("smplab-out").join(cfg.experiment.name()));
    let started = Instant::now();
    let report = run_experiment(&cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    emit_report(&report, &dir)?;
    for (name, ok) in &report.checks {
        println!("{:<4} {name}", if *ok { "ok" } else { "FAIL" });
    }
    println!(
        "{}: {} in {elapsed:.2}s, report in {}",
        report.experiment,
        if report.pass { "pass" } else { "fail" },
        dir.display()
    );
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::List => {
            for s in Scenario::ALL {
                println!("{:<26} {}", s.name(), s.summary());
            }
            return ExitCode::SUCCESS;
        }
        Command::Validate { config } => ExperimentConfig::load(&config)
            .and_then(|c| c.resolve().map(|s| (c, s)))
            .map(|(c, s)| {
                println!("{}: ok ({} grid, h = {})", c.experiment, format!("{:?}", s.domain).to_lowercase(), s.h);
                true
            }),
        Command::Run { config, out, seed } => run(config, out, seed),
    };
    match outcome.context("smplab") {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e:#}");
            ExitCode::from(2)
        }
    }
}
