//! Empirical verification of the partial-path competitive bound: on random
//! request sequences inside an ambient box Θ, the Steiner selector's
//! movement over every sub-interval [s, e] must satisfy
//!
//! ```text
//! Δ̂_[s,e] ≤ n̄ · ( dia(Θ) + 2κ + Δ^OPT_[s,e] ) + ε_MC
//! ```
//!
//! where Δ^OPT comes from the offline-optimal trajectory over the whole
//! sequence, dia(Θ) and κ come from the box bounds, and
//! `ε_MC = 0.05 · n̄ · dia(Θ)` absorbs Monte-Carlo error (the analytic bound
//! needs no slack; the sampled estimator does). Histories run untruncated.

use anyhow::{bail, Result};
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use chasectl_core::chase::{offline_optimal, select_hypothesis, WorkHistory};
use chasectl_core::geometry::{box_polytope, BoxBounds, Halfspace, Polytope};
use chasectl_core::sim::substream;

const THETA_LO: f64 = -2.0;
const THETA_HI: f64 = 3.0;

#[derive(Debug, Clone, Serialize)]
pub struct LemmaDimReport {
    pub dim: usize,
    pub instances: usize,
    pub horizon: usize,
    pub samples: usize,
    pub eps_mc: f64,
    /// max over instances and intervals of `Δ̂ − n̄(dia + 2κ + Δ^OPT)`.
    pub max_excess: f64,
    /// Count of intervals violating the bound plus Monte-Carlo slack.
    pub violations: usize,
    pub solver_failures: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub dims: Vec<LemmaDimReport>,
}

impl LemmaReport {
    pub fn pass(&self) -> bool {
        self.dims.iter().all(|d| d.pass)
    }
}

/// One random request: a box around a drifting center, intersected with Θ
/// and optionally cut by an oblique half-space through the center.
fn random_request(
    dim: usize,
    center: &mut DVector<f64>,
    theta_box: &Polytope,
    rng: &mut ChaCha8Rng,
) -> Polytope {
    for i in 0..dim {
        if rng.random_bool(0.5) {
            center[i] = rng.random_range(THETA_LO..THETA_HI);
        } else {
            center[i] =
                (center[i] + rng.random_range(-0.5..0.5)).clamp(THETA_LO, THETA_HI);
        }
    }
    let mut halfspaces = Vec::with_capacity(2 * dim + 1);
    for i in 0..dim {
        let r = rng.random_range(0.5..1.5);
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        halfspaces.push(Halfspace::new(e.clone(), center[i] + r).expect("unit normal"));
        halfspaces.push(Halfspace::new(-e, -(center[i] - r)).expect("unit normal"));
    }
    if rng.random_bool(0.5) {
        let normal = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        if normal.norm() > 1e-6 {
            let margin = rng.random_range(0.2..1.0);
            let offset = normal.dot(center) + margin;
            halfspaces.push(Halfspace::new(normal, offset).expect("nonzero normal"));
        }
    }
    Polytope::new(dim, halfspaces)
        .expect("matching dimensions")
        .intersect(theta_box)
}

struct InstanceResult {
    max_excess: f64,
    violations: usize,
    failures: usize,
}

fn run_instance(
    dim: usize,
    horizon: usize,
    samples: usize,
    instance_seed: u64,
    theta_box: &Polytope,
    bounds: BoxBounds,
    eps_mc: f64,
) -> InstanceResult {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let anchor = DVector::from_fn(dim, |_, _| rng.random_range(THETA_LO..THETA_HI));
    let mut center = anchor.clone();
    let requests: Vec<Polytope> = (0..horizon)
        .map(|_| random_request(dim, &mut center, theta_box, &mut rng))
        .collect();

    // Untruncated selector pass.
    let mut history = WorkHistory::new(anchor.clone(), horizon + 1);
    let mut selections = vec![anchor.clone()];
    let mut failures = 0usize;
    for (t, request) in requests.iter().enumerate() {
        history.push(request.clone());
        match select_hypothesis(&history, samples, substream(instance_seed, 1000 + t as u64)) {
            Ok(est) => selections.push(est.projected),
            Err(_) => {
                failures += 1;
                selections.push(selections.last().expect("anchor present").clone());
            }
        }
    }

    let opt_points = match offline_optimal(&requests, &anchor) {
        Ok((_, traj)) => {
            let mut pts = vec![anchor.clone()];
            pts.extend(traj);
            pts
        }
        Err(_) => {
            return InstanceResult {
                max_excess: f64::INFINITY,
                violations: usize::MAX,
                failures: failures + 1,
            }
        }
    };

    let dia = bounds.diameter(dim);
    let kappa = bounds.norm_bound(dim);
    let seg = |pts: &[DVector<f64>], s: usize, e: usize| -> f64 {
        (s + 1..=e).map(|t| (&pts[t] - &pts[t - 1]).norm()).sum()
    };
    let mut max_excess = f64::NEG_INFINITY;
    let mut violations = 0usize;
    for s in 0..horizon {
        for e in (s + 1)..=horizon {
            let excess = seg(&selections, s, e)
                - dim as f64 * (dia + 2.0 * kappa + seg(&opt_points, s, e));
            max_excess = max_excess.max(excess);
            if excess > eps_mc {
                violations += 1;
            }
        }
    }
    InstanceResult {
        max_excess,
        violations,
        failures,
    }
}

/// Runs the sweep. `PASS` for a dimension means no interval of any instance
/// exceeded the bound by more than `ε_MC`.
pub fn lemma1_test(
    dims: &[usize],
    instances: usize,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> Result<LemmaReport> {
    if dims.is_empty() {
        bail!("at least one dimension is required");
    }
    for &dim in dims {
        if !(1..=6).contains(&dim) {
            bail!("dim {dim} outside [1, 6]");
        }
    }
    if horizon > 20 {
        bail!("horizon {horizon} exceeds 20 (offline oracle grows with T)");
    }
    if horizon == 0 || instances == 0 || samples == 0 {
        bail!("instances, horizon and samples must be positive");
    }

    let bounds = BoxBounds::new(THETA_LO, THETA_HI).expect("static bounds");
    let mut reports = Vec::new();
    for &dim in dims {
        let theta_box = box_polytope(bounds, 1, dim - 1);
        let eps_mc = 0.05 * dim as f64 * bounds.diameter(dim);
        let results: Vec<InstanceResult> = (0..instances)
            .into_par_iter()
            .map(|i| {
                run_instance(
                    dim,
                    horizon,
                    samples,
                    substream(seed, (dim as u64) << 32 | i as u64),
                    &theta_box,
                    bounds,
                    eps_mc,
                )
            })
            .collect();
        let max_excess = results
            .iter()
            .map(|r| r.max_excess)
            .fold(f64::NEG_INFINITY, f64::max);
        let violations = results.iter().map(|r| r.violations).sum();
        let solver_failures = results.iter().map(|r| r.failures).sum();
        reports.push(LemmaDimReport {
            dim,
            instances,
            horizon,
            samples,
            eps_mc,
            max_excess,
            violations,
            solver_failures,
            pass: violations == 0 && solver_failures == 0,
        });
    }
    Ok(LemmaReport {
        seed,
        dims: reports,
    })
}

pub fn print_report(report: &LemmaReport) {
    for d in &report.dims {
        println!(
            "dim {}: {} instances × horizon {} at N = {} → max excess {:.4} (slack ε_MC = {:.4}), \
             {} violations, {} solver failures: {}",
            d.dim,
            d.instances,
            d.horizon,
            d.samples,
            d.max_excess,
            d.eps_mc,
            d.violations,
            d.solver_failures,
            if d.pass { "PASS" } else { "FAIL" }
        );
    }
}
