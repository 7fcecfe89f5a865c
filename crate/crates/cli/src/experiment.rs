//! Orchestration: fan (controller, seed) pairs across workers, persist
//! traces and a run-level summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use chasectl_core::sim::{run_closed_loop, ClosedLoopTrace};

use crate::config::{ExperimentConfig, Overrides};
use crate::csvio::{trace_file_name, write_trace};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummaryRow {
    pub controller: String,
    pub seed: u64,
    pub max_norm_x: f64,
    pub final_norm_x: f64,
    pub cum_hyp_path: f64,
    pub cum_true_var: f64,
    pub dare_failures: usize,
    pub consistency_violations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub config_hash: String,
    pub horizon: usize,
    pub runs: Vec<RunSummaryRow>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    pub traces: Vec<ClosedLoopTrace>,
}

/// Runs every selected (controller, seed) pair, writes one trace CSV each
/// plus `summary.json`, and returns everything in memory as well.
///
/// Workers own their output files and the summary is assembled in job order
/// after the join, so output is independent of worker count.
pub fn run_experiment(
    config_path: &Path,
    overrides: &Overrides,
    diagnostics: bool,
) -> Result<ExperimentOutcome> {
    let (config, _raw) = ExperimentConfig::load(config_path)?;
    let runs = config.build_runs(overrides, diagnostics)?;
    let out_dir = overrides
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    let results: Vec<(ClosedLoopTrace, f64)> = runs
        .par_iter()
        .map(|run| {
            let start = Instant::now();
            let trace = run_closed_loop(run)
                .map_err(|e| anyhow::anyhow!("run `{}` seed {}: {e}", run.label, run.seed))?;
            Ok((trace, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut trace_paths = Vec::with_capacity(results.len());
    let mut rows = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for (trace, wall) in results {
        let path = out_dir.join(trace_file_name(&trace.label, trace.seed));
        write_trace(&trace, &path)?;
        rows.push(RunSummaryRow {
            controller: trace.label.clone(),
            seed: trace.seed,
            max_norm_x: trace.max_state_norm(),
            final_norm_x: trace.final_state_norm(),
            cum_hyp_path: trace.cum_hyp_path,
            cum_true_var: trace.cum_true_var,
            dare_failures: trace.dare_failures,
            consistency_violations: trace.consistency_violations,
            wall_time_s: wall,
        });
        trace_paths.push(path);
        traces.push(trace);
    }

    let summary = ExperimentSummary {
        name: config.name.clone(),
        config_hash: runs[0].config_hash.clone(),
        horizon: overrides.horizon.unwrap_or(config.horizon),
        runs: rows,
    };
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    Ok(ExperimentOutcome {
        summary,
        summary_path,
        trace_paths,
        traces,
    })
}
