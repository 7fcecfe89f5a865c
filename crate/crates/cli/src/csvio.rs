//! Trace persistence. One CSV per (controller, seed), fixed column set, all
//! floats at 17 significant digits so reloading reproduces the run exactly.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use chasectl_core::sim::{ClosedLoopTrace, DareStatus};

/// Formats with 17 significant digits; round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_file_name(label: &str, seed: u64) -> String {
    format!("trace_{label}_{seed}.csv")
}

/// Column names in fixed order for an (n, m)-dimensional plant.
pub fn csv_columns(n: usize, m: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string(), "mode".to_string()];
    cols.extend((0..n).map(|i| format!("x_{i}")));
    cols.extend((0..m).map(|i| format!("u_{i}")));
    cols.extend((0..n).map(|i| format!("w_{i}")));
    for fixed in [
        "norm_x",
        "norm_u",
        "hyp_step_F",
        "true_step_F",
        "cum_hyp_path",
        "cum_true_var",
        "dare_status",
        "consistent",
    ] {
        cols.push(fixed.to_string());
    }
    cols
}

pub fn write_trace(trace: &ClosedLoopTrace, path: &Path) -> Result<()> {
    let first = trace
        .steps
        .first()
        .context("trace has no steps to write")?;
    let n = first.x.len();
    let m = first.u.len();
    let mut out = String::new();
    out.push_str(&csv_columns(n, m).join(","));
    out.push('\n');
    for step in &trace.steps {
        let mut fields: Vec<String> = vec![step.t.to_string(), step.mode.to_string()];
        fields.extend(step.x.iter().map(|&v| format_float(v)));
        fields.extend(step.u.iter().map(|&v| format_float(v)));
        fields.extend(step.w.iter().map(|&v| format_float(v)));
        fields.push(format_float(step.x.norm()));
        fields.push(format_float(step.u.norm()));
        fields.push(format_float(step.hyp_step));
        fields.push(format_float(step.true_step));
        fields.push(format_float(step.cum_hyp_path));
        fields.push(format_float(step.cum_true_var));
        fields.push(step.dare.as_str().to_string());
        fields.push(step.consistent.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// A reloaded trace: raw header plus typed columns.
#[derive(Debug, Clone)]
pub struct ParsedTrace {
    pub header: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub t: Vec<usize>,
    pub mode: Vec<usize>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub norm_x: Vec<f64>,
    pub norm_u: Vec<f64>,
    pub hyp_step: Vec<f64>,
    pub true_step: Vec<f64>,
    pub cum_hyp_path: Vec<f64>,
    pub cum_true_var: Vec<f64>,
    pub dare: Vec<DareStatus>,
    pub consistent: Vec<bool>,
}

impl ParsedTrace {
    pub fn horizon(&self) -> usize {
        self.t.len().saturating_sub(1)
    }
}

pub fn read_trace(path: &Path) -> Result<ParsedTrace> {
    let raw =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = raw.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty trace file")?
        .split(',')
        .map(str::to_string)
        .collect();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    if csv_columns(n, m) != header {
        bail!("{}: unexpected column layout", path.display());
    }
    let mut parsed = ParsedTrace {
        header,
        n,
        m,
        t: vec![],
        mode: vec![],
        x: vec![],
        u: vec![],
        w: vec![],
        norm_x: vec![],
        norm_u: vec![],
        hyp_step: vec![],
        true_step: vec![],
        cum_hyp_path: vec![],
        cum_true_var: vec![],
        dare: vec![],
        consistent: vec![],
    };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 2 + 2 * n + m + 8;
        if fields.len() != expected {
            bail!(
                "{}:{}: {} fields, expected {expected}",
                path.display(),
                lineno + 2,
                fields.len()
            );
        }
        let fl = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("{}:{}: bad float {s}", path.display(), lineno + 2))
        };
        let mut k = 0usize;
        let mut take = || {
            let v = fields[k];
            k += 1;
            v
        };
        parsed.t.push(take().parse()?);
        parsed.mode.push(take().parse()?);
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(fl(take())?);
        }
        parsed.x.push(xs);
        let mut us = Vec::with_capacity(m);
        for _ in 0..m {
            us.push(fl(take())?);
        }
        parsed.u.push(us);
        let mut ws = Vec::with_capacity(n);
        for _ in 0..n {
            ws.push(fl(take())?);
        }
        parsed.w.push(ws);
        parsed.norm_x.push(fl(take())?);
        parsed.norm_u.push(fl(take())?);
        parsed.hyp_step.push(fl(take())?);
        parsed.true_step.push(fl(take())?);
        parsed.cum_hyp_path.push(fl(take())?);
        parsed.cum_true_var.push(fl(take())?);
        let dare = take();
        parsed.dare.push(
            DareStatus::parse(dare)
                .with_context(|| format!("{}: bad dare status {dare}", path.display()))?,
        );
        parsed.consistent.push(match take() {
            "true" => true,
            "false" => false,
            other => bail!("{}: bad consistency flag {other}", path.display()),
        });
    }
    Ok(parsed)
}
