//! Per-step records of a closed-loop run.

use nalgebra::DVector;

use crate::param::ParamPoint;

/// Outcome of the gain synthesis at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DareStatus {
    /// Initial row; nothing synthesized yet.
    Init,
    Ok,
    /// Synthesis failed; the previous gain was held.
    Fallback,
    /// Controller performs no synthesis.
    NotApplicable,
}

impl DareStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DareStatus::Init => "init",
            DareStatus::Ok => "ok",
            DareStatus::Fallback => "fallback",
            DareStatus::NotApplicable => "na",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "init" => Some(DareStatus::Init),
            "ok" => Some(DareStatus::Ok),
            "fallback" => Some(DareStatus::Fallback),
            "na" => Some(DareStatus::NotApplicable),
            _ => None,
        }
    }
}

/// One row of a closed-loop trace.
///
/// Row `t ≥ 1` describes the state after the transition `t−1 → t`: `w` is
/// the disturbance applied at `t` (zero padding on the final row),
/// `consistent` says whether the model that generated the transition into
/// `x_t` lies in the request set built from it, and `hypothesis` is the
/// selection made after observing `x_t` (driving the input `u` applied at
/// `t`).
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub mode: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub theta: ParamPoint,
    pub hypothesis: Option<ParamPoint>,
    /// `‖θ̂_t − θ̂_{t−1}‖_F`, zero when no hypothesis exists.
    pub hyp_step: f64,
    /// `‖θ_t − θ_{t−1}‖_F`.
    pub true_step: f64,
    /// Running `Σ hyp_step` through this row.
    pub cum_hyp_path: f64,
    /// Running `Σ true_step` through this row.
    pub cum_true_var: f64,
    pub dare: DareStatus,
    pub consistent: bool,
    /// Distance from the raw Steiner estimate to the request set.
    pub steiner_dist: Option<f64>,
    /// Diameter proxy of the active window (union bounding box), recorded
    /// when chase diagnostics are enabled.
    pub window_dia: Option<f64>,
    /// Membership of the projected hypothesis in the request set at 1e-7.
    pub hyp_in_set: Option<bool>,
}

/// Full closed-loop record of one (controller, seed) run.
#[derive(Debug, Clone)]
pub struct ClosedLoopTrace {
    pub steps: Vec<StepRecord>,
    pub seed: u64,
    pub label: String,
    pub config_hash: String,
    pub cum_hyp_path: f64,
    pub cum_true_var: f64,
    pub dare_failures: usize,
    pub consistency_violations: usize,
}

impl ClosedLoopTrace {
    pub fn horizon(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    pub fn max_state_norm(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.x.norm())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_state_norm(&self) -> f64 {
        self.steps.last().map(|s| s.x.norm()).unwrap_or(0.0)
    }
}

/// `Σ_{τ=s+1}^{e} ‖θ_τ − θ_{τ−1}‖_F` over the stored true models.
pub fn total_variation(trace: &ClosedLoopTrace, s: usize, e: usize) -> f64 {
    assert!(s < e, "need s < e");
    assert!(e < trace.steps.len(), "interval end out of range");
    (s + 1..=e)
        .map(|tau| trace.steps[tau].theta.distance(&trace.steps[tau - 1].theta))
        .sum()
}
