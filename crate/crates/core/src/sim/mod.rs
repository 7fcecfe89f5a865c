//! Closed-loop simulation: plants, disturbances, controllers, and the
//! runner reproducing the benchmark experiments.

mod controller;
mod disturbance;
mod plant;
mod trace;

pub use controller::{ols_estimate, substream, ControllerSpec, ControllerState, StepDecision};
pub use disturbance::{DisturbanceModel, DisturbanceRealization, DisturbanceSpec};
pub use plant::{
    ltv_example_theta, mjls_next_mode, step_plant, LtvBuiltin, PlantModel, PlantRealization,
};
pub use trace::{total_variation, ClosedLoopTrace, DareStatus, StepRecord};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chase::ChaseError;
use crate::geometry::{box_polytope, consistent_halfspaces, BoxBounds, GeometryError, Polytope};

const SALT_PLANT: u64 = 1;
const SALT_DISTURBANCE: u64 = 2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(
        "disturbance bound violated at step {step}: |x[{coord}]| = {residual:.6e} > W = {bound:.6e} \
         with zero regressor"
    )]
    WViolation {
        step: usize,
        coord: usize,
        residual: f64,
        bound: f64,
    },
    #[error("request set empty at step {step}")]
    Infeasible { step: usize },
    #[error("solver failure at step {step}: {detail}")]
    Solver { step: usize, detail: String },
}

impl SimError {
    pub(crate) fn from_geometry(err: GeometryError, step: usize) -> Self {
        match err {
            GeometryError::WViolation {
                coord,
                residual,
                bound,
            } => SimError::WViolation {
                step,
                coord,
                residual,
                bound,
            },
            GeometryError::Infeasible => SimError::Infeasible { step },
            other => SimError::Solver {
                step,
                detail: other.to_string(),
            },
        }
    }

    pub(crate) fn from_chase(err: ChaseError, step: usize) -> Self {
        match err {
            ChaseError::Infeasible => SimError::Infeasible { step },
            ChaseError::Geometry(g) => SimError::from_geometry(g, step),
            other => SimError::Solver {
                step,
                detail: other.to_string(),
            },
        }
    }
}

/// Everything needed to execute one (plant, disturbance, controller, seed)
/// run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub plant: PlantModel,
    pub disturbance: DisturbanceSpec,
    pub controller: ControllerSpec,
    pub w_bound: f64,
    pub theta_box: BoxBounds,
    pub horizon: usize,
    pub seed: u64,
    pub x0: DVector<f64>,
    /// Human-readable controller label carried into the trace.
    pub label: String,
    /// Provenance digest carried into the trace.
    pub config_hash: String,
    /// Record per-step Steiner distances and window diameters (slower).
    pub chase_diagnostics: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon < 1 {
            return Err(SimError::Config("horizon must be ≥ 1".into()));
        }
        if !(self.w_bound > 0.0) {
            return Err(SimError::Config("disturbance bound W must be > 0".into()));
        }
        self.plant.validate()?;
        let (n, m) = self.plant.dims();
        self.disturbance.validate(n, self.w_bound)?;
        self.controller.validate(n, m)?;
        if self.x0.len() != n {
            return Err(SimError::Config(format!(
                "x0 has dimension {}, plant expects {n}",
                self.x0.len()
            )));
        }
        Ok(())
    }
}

/// Executes the closed loop: apply the input, observe the next state, carve
/// the consistent set, select a hypothesis, synthesize a gain, repeat.
/// Fully deterministic given the seed, for any thread count.
pub fn run_closed_loop(cfg: &RunConfig) -> Result<ClosedLoopTrace, SimError> {
    cfg.validate()?;
    let (n, m) = cfg.plant.dims();
    let dim = n * (n + m);

    let mut plant_rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, SALT_PLANT));
    let realization = cfg.plant.realize(cfg.horizon, &mut plant_rng);
    let mut dist_rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, SALT_DISTURBANCE));
    let disturbance = cfg.disturbance.realize(cfg.horizon, n, &mut dist_rng);

    let theta_box_poly = box_polytope(cfg.theta_box, n, m);
    let (theta0_flat, radius) = theta_box_poly
        .chebyshev_center()
        .map_err(|e| SimError::from_geometry(e, 0))?;
    debug_assert!(radius > 0.0);

    let mut controller = ControllerState::build(
        &cfg.controller,
        n,
        m,
        cfg.theta_box,
        &theta_box_poly,
        &theta0_flat,
        cfg.seed,
        cfg.chase_diagnostics,
    )?;

    let mut x = cfg.x0.clone();
    let mut u = controller.initial_input(&x);
    let mode_at = |t: usize| realization.modes.as_ref().map_or(0, |seq| seq[t]);

    let mut steps: Vec<StepRecord> = Vec::with_capacity(cfg.horizon + 1);
    steps.push(StepRecord {
        t: 0,
        mode: mode_at(0),
        x: x.clone(),
        u: u.clone(),
        w: DVector::zeros(n),
        theta: realization.thetas[0].clone(),
        hypothesis: controller.initial_hypothesis(),
        hyp_step: 0.0,
        true_step: 0.0,
        cum_hyp_path: 0.0,
        cum_true_var: 0.0,
        dare: DareStatus::Init,
        consistent: true,
        steiner_dist: None,
        window_dia: None,
        hyp_in_set: None,
    });

    let mut cum_hyp = 0.0;
    let mut cum_var = 0.0;
    let mut dare_failures = 0;
    let mut violations = 0;

    for k in 1..=cfg.horizon {
        let w_applied = disturbance.w(k - 1, &x);
        steps[k - 1].w = w_applied.clone();
        let x_next = step_plant(&realization.thetas[k - 1], &x, &u, &w_applied);

        // Consistency of the true generating model against the request set
        // carved from this transition. Constraint rows carry unit normals,
        // so offsets are O(1) and a tolerance scaled to the largest offset
        // keeps the flag exact even on divergent open-loop trajectories.
        let halfspaces = consistent_halfspaces(&x, &u, &x_next, cfg.w_bound)
            .map_err(|e| SimError::from_geometry(e, k))?;
        let request = Polytope::new(dim, halfspaces)
            .expect("construction yields matching dimensions")
            .intersect(&theta_box_poly);
        let offset_scale = request
            .halfspaces()
            .iter()
            .fold(0.0f64, |acc, hs| acc.max(hs.offset().abs()));
        let tol = 1e-9 * (1.0 + offset_scale);
        let consistent = request.contains(&realization.thetas[k - 1].flat(), tol);
        if !consistent {
            violations += 1;
        }

        let decision = controller.step(k, &x, &u, &x_next, cfg.w_bound)?;
        debug_assert_eq!(decision.u.len(), m);

        let hyp_step = match (&steps[k - 1].hypothesis, &decision.hypothesis) {
            (Some(a), Some(b)) => a.distance(b),
            _ => 0.0,
        };
        let true_step = realization.thetas[k].distance(&realization.thetas[k - 1]);
        cum_hyp += hyp_step;
        cum_var += true_step;
        if decision.dare == DareStatus::Fallback {
            dare_failures += 1;
        }

        let steiner_dist = decision
            .steiner
            .as_ref()
            .map(|e| (&e.raw - &e.projected).norm());
        let hyp_in_set = decision
            .steiner
            .as_ref()
            .map(|e| request.contains(&e.projected, 1e-7));

        steps.push(StepRecord {
            t: k,
            mode: mode_at(k),
            x: x_next.clone(),
            u: decision.u.clone(),
            w: DVector::zeros(n),
            theta: realization.thetas[k].clone(),
            hypothesis: decision.hypothesis,
            hyp_step,
            true_step,
            cum_hyp_path: cum_hyp,
            cum_true_var: cum_var,
            dare: decision.dare,
            consistent,
            steiner_dist,
            window_dia: decision.window_dia,
            hyp_in_set,
        });

        x = x_next;
        u = decision.u;
    }

    Ok(ClosedLoopTrace {
        steps,
        seed: cfg.seed,
        label: cfg.label.clone(),
        config_hash: cfg.config_hash.clone(),
        cum_hyp_path: cum_hyp,
        cum_true_var: cum_var,
        dare_failures,
        consistency_violations: violations,
    })
}
