use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use chasectl::config::Overrides;
use chasectl::experiment::run_experiment;
use chasectl::lemma::{lemma1_test, print_report};
use chasectl::plot::emit_plot;

/// Online stabilization experiments for unknown time-varying linear systems.
#[derive(Parser)]
#[command(name = "chasectl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (controller, seed) pair of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list (repeatable).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only run controllers with these labels (repeatable).
        #[arg(long = "controller")]
        controllers: Vec<String>,
        /// Override the Monte-Carlo sample count of chasing controllers.
        #[arg(long)]
        samples: Option<usize>,
        /// Override the horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Parse and validate a config without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the partial-path bound of the selector on random instances.
    Lemma1Test {
        /// Chasing dimension (repeatable), each in [1, 6].
        #[arg(long = "dim", default_values_t = [2usize, 3usize])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 15)]
        horizon: usize,
        /// Monte-Carlo samples per selection.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Optional JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render trace CSVs into one three-panel SVG.
    Plot {
        #[arg(long)]
        out: PathBuf,
        /// Trace files sharing one horizon.
        traces: Vec<PathBuf>,
    },
}

fn configure_workers() -> Result<()> {
    if let Ok(value) = std::env::var("CHASECTL_WORKERS") {
        let workers: usize = value
            .parse()
            .with_context(|| format!("CHASECTL_WORKERS = {value:?} is not a worker count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .context("installing worker pool")?;
    }
    Ok(())
}

fn run() -> Result<()> {
    configure_workers()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            controllers,
            samples,
            horizon,
        } => {
            let overrides = Overrides {
                seeds: (!seeds.is_empty()).then_some(seeds),
                out,
                controllers: (!controllers.is_empty()).then_some(controllers),
                samples,
                horizon,
            };
            let outcome = run_experiment(&config, &overrides, false)?;
            for row in &outcome.summary.runs {
                println!(
                    "{} seed {}: max |x| = {:.6e}, final |x| = {:.6e}, dare fallbacks {}, \
                     consistency violations {} ({:.2}s)",
                    row.controller,
                    row.seed,
                    row.max_norm_x,
                    row.final_norm_x,
                    row.dare_failures,
                    row.consistency_violations,
                    row.wall_time_s
                );
            }
            println!(
                "wrote {} traces and {}",
                outcome.trace_paths.len(),
                outcome.summary_path.display()
            );
        }
        Command::Validate { config } => {
            let (parsed, _) = chasectl::config::ExperimentConfig::load(&config)?;
            parsed.build_runs(&Overrides::default(), false)?;
            println!("config ok: {}", config.display());
        }
        Command::Lemma1Test {
            dims,
            instances,
            horizon,
            samples,
            seed,
            out,
        } => {
            let report = lemma1_test(&dims, instances, horizon, samples, seed)?;
            print_report(&report);
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&report)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if !report.pass() {
                anyhow::bail!("partial-path bound violated");
            }
        }
        Command::Plot { out, traces } => {
            emit_plot(&traces, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
