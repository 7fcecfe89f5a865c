//! Work-function machinery and the functional-Steiner-point selector, plus
//! the offline-optimal oracle used to score it.
//!
//! The work function over a history of request sets `K_1, …, K_t` anchored
//! at `q₀` is
//!
//! ```text
//! ω_t(x) = min_{q_s ∈ K_s}  Σ_{s=1..t} ‖q_s − q_{s−1}‖ + ‖x − q_t‖
//! ```
//!
//! Its Fenchel conjugate at a unit direction is one second-order cone
//! program, and the hypothesis selector averages conjugate values over
//! random sphere directions to estimate the functional Steiner point
//! `−n̄ ⨍ ω*(v) v dv`, projecting the estimate back into the newest request
//! set.
//!
//! The `n̄` in that formula is the ambient chasing dimension — for system
//! hypotheses, `n̄ = n(n+m)` of the flat parameter space, not the state
//! dimension. The chase happens in parameter space throughout.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::conic::{
    solve_socp, SocConstraint, SocpProblem, SocpStatus, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL,
    DEFAULT_MAX_ITER,
};
use crate::geometry::{GeometryError, Polytope};

/// Default window cap for closed-loop histories.
pub const DEFAULT_WINDOW_CAP: usize = 50;
/// Default Monte-Carlo sample count per selection in closed-loop runs.
pub const DEFAULT_STEINER_SAMPLES: usize = 200;

#[derive(Debug, Error)]
pub enum ChaseError {
    #[error("request set is empty; the work function is infeasible")]
    Infeasible,
    #[error("work-function program ended with solver status {0:?}")]
    Solver(SocpStatus),
    #[error("history holds no request sets")]
    EmptyHistory,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Anchor point plus the ordered request sets defining the work function.
///
/// Requests are stored already intersected with the ambient box, so the
/// newest entry is the set the selected hypothesis must belong to.
#[derive(Debug, Clone)]
pub struct WorkHistory {
    anchor: DVector<f64>,
    requests: Vec<Polytope>,
    window_cap: usize,
}

impl WorkHistory {
    pub fn new(anchor: DVector<f64>, window_cap: usize) -> Self {
        assert!(window_cap >= 1, "window cap must be at least 1");
        Self {
            anchor,
            requests: Vec::new(),
            window_cap,
        }
    }

    pub fn push(&mut self, request: Polytope) {
        assert_eq!(
            request.dim(),
            self.anchor.len(),
            "request dimension must match anchor"
        );
        self.requests.push(request);
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    pub fn requests(&self) -> &[Polytope] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn window_cap(&self) -> usize {
        self.window_cap
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// Drops the oldest requests until the window cap holds and restarts the
    /// work function from `last_selection`. No-op while within the cap.
    ///
    /// Restart semantics: after truncation the chase behaves as if it began
    /// at the most recent selection with only the retained requests.
    pub fn truncate(&mut self, last_selection: &DVector<f64>) {
        if self.requests.len() <= self.window_cap {
            return;
        }
        assert_eq!(last_selection.len(), self.anchor.len());
        let excess = self.requests.len() - self.window_cap;
        self.requests.drain(0..excess);
        self.anchor = last_selection.clone();
    }
}

/// Variable layout for the work-function cone program:
/// `x` first, then `q_1..q_t` block-wise, then `λ`, then `λ_1..λ_t`.
struct ConjugateLayout {
    dim: usize,
    t: usize,
}

impl ConjugateLayout {
    fn x(&self, i: usize) -> usize {
        i
    }

    fn q(&self, s: usize, i: usize) -> usize {
        debug_assert!((1..=self.t).contains(&s));
        s * self.dim + i
    }

    fn lambda(&self) -> usize {
        (self.t + 1) * self.dim
    }

    fn lambda_s(&self, s: usize) -> usize {
        (self.t + 1) * self.dim + s
    }

    fn num_vars(&self) -> usize {
        (self.t + 1) * self.dim + 1 + self.t
    }
}

/// Adds the chain of movement cones `‖q_s − q_{s−1}‖ ≤ λ_s` together with
/// the request half-spaces `a·q_s ≤ b`.
fn push_chain_constraints(
    problem: &mut SocpProblem,
    dim: usize,
    anchor: &DVector<f64>,
    requests: &[Polytope],
    q_index: &dyn Fn(usize, usize) -> usize,
    lambda_index: &dyn Fn(usize) -> usize,
) {
    let d = dim;
    let n = problem.num_vars;
    for s in 1..=requests.len() {
        let mut a = DMatrix::zeros(d, n);
        let mut b = DVector::zeros(d);
        for i in 0..d {
            a[(i, q_index(s, i))] = 1.0;
            if s == 1 {
                b[i] = -anchor[i];
            } else {
                a[(i, q_index(s - 1, i))] = -1.0;
            }
        }
        let mut c = DVector::zeros(n);
        c[lambda_index(s)] = 1.0;
        problem.soc_constraints.push(SocConstraint { a, b, c, d: 0.0 });
        for hs in requests[s - 1].halfspaces() {
            let mut normal = DVector::zeros(n);
            for i in 0..d {
                normal[q_index(s, i)] = hs.normal()[i];
            }
            problem.linear_ineqs.push((normal, hs.offset()));
        }
    }
}

fn status_to_error(status: SocpStatus) -> ChaseError {
    match status {
        SocpStatus::Infeasible => ChaseError::Infeasible,
        other => ChaseError::Solver(other),
    }
}

/// Assembles the cone program behind `ω*_t(v)`, with decision variables
/// `x, q_1..q_t, λ, λ_1..λ_t`: minimize `λ + Σ λ_s − v·x` subject to
/// `‖q_s − q_{s−1}‖ ≤ λ_s`, `‖x − q_t‖ ≤ λ` and the request half-spaces.
pub fn conjugate_program(history: &WorkHistory, v: &DVector<f64>) -> SocpProblem {
    let d = history.dim();
    assert_eq!(v.len(), d, "direction dimension must match history");
    let layout = ConjugateLayout {
        dim: d,
        t: history.len(),
    };
    let mut problem = SocpProblem::new(layout.num_vars());
    problem.objective[layout.lambda()] = 1.0;
    for s in 1..=layout.t {
        problem.objective[layout.lambda_s(s)] = 1.0;
    }
    for i in 0..d {
        problem.objective[layout.x(i)] = -v[i];
    }
    push_chain_constraints(
        &mut problem,
        d,
        history.anchor(),
        history.requests(),
        &|s, i| layout.q(s, i),
        &|s| layout.lambda_s(s),
    );
    // Final leg ‖x − q_t‖ ≤ λ.
    let n = problem.num_vars;
    let mut a = DMatrix::zeros(d, n);
    for i in 0..d {
        a[(i, layout.x(i))] = 1.0;
        a[(i, layout.q(layout.t, i))] = -1.0;
    }
    let mut c = DVector::zeros(n);
    c[layout.lambda()] = 1.0;
    problem.soc_constraints.push(SocConstraint {
        a,
        b: DVector::zeros(d),
        c,
        d: 0.0,
    });
    problem
}

/// Fenchel conjugate `ω*_t(v) = inf_x ω_t(x) − v·x` of the work function,
/// evaluated by one cone program.
///
/// Finite for `‖v‖ ≤ 1`; the caller supplies unit directions. A stall at
/// the default tolerances (possible when request slabs are very thin) is
/// retried once at reduced accuracy, which is still far below the
/// Monte-Carlo noise floor of the sphere average consuming these values.
pub fn work_conjugate(history: &WorkHistory, v: &DVector<f64>) -> Result<f64, ChaseError> {
    if history.is_empty() {
        return Err(ChaseError::EmptyHistory);
    }
    debug_assert!(
        (v.norm() - 1.0).abs() <= 1e-9,
        "direction must be unit norm"
    );
    let problem = conjugate_program(history, v);
    let sol = solve_socp(&problem, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
    match sol.status {
        SocpStatus::Optimal => Ok(sol.objective_value),
        SocpStatus::MaxIter => {
            let relaxed = solve_socp(&problem, 1e-6, 1e-6, 2 * DEFAULT_MAX_ITER);
            match relaxed.status {
                SocpStatus::Optimal => Ok(relaxed.objective_value),
                other => Err(status_to_error(other)),
            }
        }
        other => Err(status_to_error(other)),
    }
}

/// Unit directions for the sphere average, from the seeded generator.
///
/// Directions are normalized standard Gaussian draws, pre-generated
/// sequentially, and emitted in mirrored pairs `v, −v`. The mirrored half
/// cancels the even part of the conjugate in the average, which carries no
/// information about the Steiner point but dominates the naive estimator's
/// variance.
pub fn sample_unit_directions(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut g: DVector<f64> = DVector::zeros(dim);
        loop {
            for i in 0..dim {
                g[i] = rng.sample::<f64, _>(StandardNormal);
            }
            if g.norm() >= 1e-12 {
                break;
            }
        }
        let v: DVector<f64> = &g / g.norm();
        out.push(v.clone());
        if out.len() < count {
            out.push(-v);
        }
    }
    out
}

fn conjugate_batch(
    history: &WorkHistory,
    dirs: &[DVector<f64>],
) -> Result<Vec<f64>, ChaseError> {
    // Parallel map over pre-generated directions; each solve is independent
    // and deterministic, so the outcome does not depend on thread count.
    dirs.par_iter()
        .map(|v| work_conjugate(history, v))
        .collect()
}

fn steiner_from_values(dirs: &[DVector<f64>], values: &[f64], dim: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(dim);
    for (v, h) in dirs.iter().zip(values.iter()) {
        acc += v * *h;
    }
    acc * (-(dim as f64) / dirs.len() as f64)
}

/// Monte-Carlo estimate `−(n̄/N) Σ h_i v_i` of the functional Steiner point.
///
/// Deterministic given seed and sample count, independent of execution
/// parallelism: directions are pre-generated sequentially and the reduction
/// runs in fixed index order.
pub fn steiner_raw(
    history: &WorkHistory,
    num_samples: usize,
    rng_seed: u64,
) -> Result<DVector<f64>, ChaseError> {
    assert!(num_samples >= 1, "at least one sample is required");
    let dirs = sample_unit_directions(history.dim(), num_samples, rng_seed);
    let values = conjugate_batch(history, &dirs)?;
    Ok(steiner_from_values(&dirs, &values, history.dim()))
}

/// Summary statistics of the conjugate values behind one estimate.
#[derive(Debug, Clone, Copy)]
pub struct ConjugateStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ConjugateStats {
    fn from_values(values: &[f64]) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        Self {
            min,
            max,
            mean: sum / values.len() as f64,
        }
    }
}

/// One hypothesis selection: the raw sphere-average estimate and its
/// projection into the newest request set.
#[derive(Debug, Clone)]
pub struct SteinerEstimate {
    pub raw: DVector<f64>,
    pub projected: DVector<f64>,
    pub samples: usize,
    pub conjugate_values: ConjugateStats,
}

/// Estimates the functional Steiner point of the current work function and
/// projects it into the newest request set.
///
/// The exact Steiner point lies inside that set; the projection repairs
/// Monte-Carlo error, so `projected` is always a valid hypothesis.
pub fn select_hypothesis(
    history: &WorkHistory,
    num_samples: usize,
    rng_seed: u64,
) -> Result<SteinerEstimate, ChaseError> {
    let last = history.requests().last().ok_or(ChaseError::EmptyHistory)?;
    let dirs = sample_unit_directions(history.dim(), num_samples, rng_seed);
    let values = conjugate_batch(history, &dirs)?;
    let raw = steiner_from_values(&dirs, &values, history.dim());
    let projected = last.project(&raw)?;
    Ok(SteinerEstimate {
        raw,
        projected,
        samples: num_samples,
        conjugate_values: ConjugateStats::from_values(&values),
    })
}

/// Minimum total path length serving every request in order from `anchor`,
/// solved as one cone program; returns the cost and a minimizing trajectory.
pub fn offline_optimal(
    requests: &[Polytope],
    anchor: &DVector<f64>,
) -> Result<(f64, Vec<DVector<f64>>), ChaseError> {
    if requests.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let d = anchor.len();
    let t = requests.len();
    // Layout: q_s at [(s−1)d, sd), λ_s at td + (s−1).
    let num_vars = t * d + t;
    let q_index = move |s: usize, i: usize| (s - 1) * d + i;
    let lambda_index = move |s: usize| t * d + (s - 1);
    let mut problem = SocpProblem::new(num_vars);
    for s in 1..=t {
        problem.objective[lambda_index(s)] = 1.0;
    }
    push_chain_constraints(&mut problem, d, anchor, requests, &q_index, &lambda_index);
    let sol = solve_socp(&problem, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
    match sol.status {
        SocpStatus::Optimal => {
            let mut trajectory = Vec::with_capacity(t);
            for s in 1..=t {
                let mut q = DVector::zeros(d);
                for i in 0..d {
                    q[i] = sol.primal[q_index(s, i)];
                }
                trajectory.push(q);
            }
            Ok((sol.objective_value, trajectory))
        }
        other => Err(status_to_error(other)),
    }
}

/// Total Euclidean step length `Σ ‖p_τ − p_{τ−1}‖`; zero for one point.
pub fn path_length(points: &[DVector<f64>]) -> f64 {
    assert!(!points.is_empty(), "path needs at least one point");
    points
        .windows(2)
        .map(|pair| (&pair[1] - &pair[0]).norm())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_polytope, BoxBounds, Halfspace};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    /// 1-D interval `[lo, hi]` as a polytope.
    fn interval(lo: f64, hi: f64) -> Polytope {
        Polytope::new(
            1,
            vec![
                Halfspace::new(dvector![1.0], hi).unwrap(),
                Halfspace::new(dvector![-1.0], -lo).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Degenerate point set `{c}` in the plane.
    fn point_set(c: [f64; 2]) -> Polytope {
        let mut hs = Vec::new();
        for (i, &ci) in c.iter().enumerate() {
            let mut e = DVector::zeros(2);
            e[i] = 1.0;
            hs.push(Halfspace::new(e.clone(), ci).unwrap());
            hs.push(Halfspace::new(-e, -ci).unwrap());
        }
        Polytope::new(2, hs).unwrap()
    }

    #[test]
    fn conjugate_of_origin_point_set_is_zero() {
        let mut history = WorkHistory::new(dvector![0.0, 0.0], 10);
        history.push(point_set([0.0, 0.0]));
        let v = dvector![1.0, 0.0];
        assert_abs_diff_eq!(work_conjugate(&history, &v).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn conjugate_of_point_set_has_closed_form() {
        // ω*₁(v) = ‖c‖ − v·c for a point set {c} anchored at the origin.
        let mut history = WorkHistory::new(dvector![0.0, 0.0], 10);
        history.push(point_set([1.0, 0.0]));
        let up = dvector![0.0, 1.0];
        let right = dvector![1.0, 0.0];
        assert_abs_diff_eq!(work_conjugate(&history, &up).unwrap(), 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(work_conjugate(&history, &right).unwrap(), 0.0, epsilon = 1e-5);
    }

    #[test]
    fn conjugate_of_two_interval_history() {
        let mut history = WorkHistory::new(dvector![0.0], 10);
        history.push(interval(2.0, 3.0));
        history.push(interval(5.0, 6.0));
        let plus = dvector![1.0];
        let minus = dvector![-1.0];
        assert_abs_diff_eq!(work_conjugate(&history, &plus).unwrap(), 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(
            work_conjugate(&history, &minus).unwrap(),
            10.0,
            epsilon = 1e-5
        );
    }

    #[test]
    fn conjugate_is_monotone_in_time() {
        let sets = [
            interval(2.0, 3.0),
            interval(1.0, 4.0),
            interval(-2.0, -1.0),
            interval(0.5, 0.6),
        ];
        for v in [dvector![1.0], dvector![-1.0]] {
            let mut prev = f64::NEG_INFINITY;
            let mut history = WorkHistory::new(dvector![0.0], 100);
            for set in &sets {
                history.push(set.clone());
                let val = work_conjugate(&history, &v).unwrap();
                assert!(
                    val >= prev - 1e-6,
                    "conjugate decreased from {prev} to {val}"
                );
                prev = val;
            }
        }
    }

    #[test]
    fn steiner_raw_symmetric_box_is_origin() {
        let mut history = WorkHistory::new(dvector![0.0, 0.0], 10);
        history.push(box_polytope(BoxBounds::new(-1.0, 1.0).unwrap(), 1, 1));
        let est = steiner_raw(&history, 1000, 7).unwrap();
        assert!(est.norm() <= 0.1, "estimate {est} should be near origin");
    }

    #[test]
    fn steiner_raw_recovers_point_set() {
        // Sphere moment identity: the exact Steiner point of {c} is c.
        let mut history = WorkHistory::new(dvector![0.0, 0.0], 10);
        history.push(point_set([1.0, 0.0]));
        let est = steiner_raw(&history, 4000, 11).unwrap();
        let c = dvector![1.0, 0.0];
        assert!(
            (&est - &c).norm() <= 0.1 * (1.0 + c.norm()),
            "estimate {est} too far from {c}"
        );
    }

    #[test]
    fn steiner_raw_single_sample_is_finite() {
        let mut history = WorkHistory::new(dvector![0.0, 0.0], 10);
        history.push(box_polytope(BoxBounds::new(-1.0, 1.0).unwrap(), 1, 1));
        let est = steiner_raw(&history, 1, 3).unwrap();
        assert!(est.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn select_hypothesis_projects_into_newest_set() {
        let mut history = WorkHistory::new(dvector![5.0, 0.0], 10);
        let the_box = box_polytope(BoxBounds::new(-1.0, 1.0).unwrap(), 1, 1);
        history.push(the_box.clone());
        let est = select_hypothesis(&history, 4000, 5).unwrap();
        assert!(the_box.contains(&est.projected, 1e-7));
        let dist = (&est.raw - the_box.project(&est.raw).unwrap()).norm();
        assert!(dist <= 0.15, "raw estimate {dist} from the box");

        let mut history = WorkHistory::new(dvector![0.0], 10);
        history.push(interval(2.0, 3.0));
        history.push(interval(5.0, 6.0));
        let est = select_hypothesis(&history, 500, 5).unwrap();
        assert!(est.projected[0] >= 5.0 - 1e-7 && est.projected[0] <= 6.0 + 1e-7);
    }

    #[test]
    fn truncate_restarts_from_last_selection() {
        let mut history = WorkHistory::new(dvector![0.0], 50);
        for _ in 0..51 {
            history.push(interval(0.0, 1.0));
        }
        history.truncate(&dvector![0.5]);
        assert_eq!(history.len(), 50);
        assert_eq!(history.anchor(), &dvector![0.5]);

        let mut short = WorkHistory::new(dvector![0.0], 50);
        short.push(interval(0.0, 1.0));
        short.truncate(&dvector![0.5]);
        assert_eq!(short.len(), 1);
        assert_eq!(short.anchor(), &dvector![0.0]);
    }

    #[test]
    fn truncate_to_single_set_chasing() {
        // Cap 1 degenerates to ω_t(x) = min_{q∈K_t} ‖x−q‖ + ‖q−anchor‖;
        // with K = [2,3] and anchor 1 the conjugate at v = +1 is −1.
        let mut history = WorkHistory::new(dvector![0.0], 1);
        history.push(interval(-4.0, -3.0));
        history.push(interval(2.0, 3.0));
        history.truncate(&dvector![1.0]);
        assert_eq!(history.len(), 1);
        let val = work_conjugate(&history, &dvector![1.0]).unwrap();
        assert_abs_diff_eq!(val, -1.0, epsilon = 1e-5);
    }

    #[test]
    fn offline_optimal_interval_examples() {
        let anchor = dvector![0.0];
        let (cost, traj) =
            offline_optimal(&[interval(2.0, 3.0), interval(5.0, 6.0)], &anchor).unwrap();
        assert_abs_diff_eq!(cost, 5.0, epsilon = 1e-5);
        assert_eq!(traj.len(), 2);

        let (cost, _) =
            offline_optimal(&[interval(0.0, 10.0), interval(3.0, 5.0)], &anchor).unwrap();
        assert_abs_diff_eq!(cost, 3.0, epsilon = 1e-5);

        let anchor_inside = dvector![4.0];
        let (cost, traj) =
            offline_optimal(&[interval(0.0, 10.0), interval(3.0, 5.0)], &anchor_inside)
                .unwrap();
        assert_abs_diff_eq!(cost, 0.0, epsilon = 1e-5);
        for q in traj {
            assert_abs_diff_eq!(q[0], 4.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(&[dvector![0.0, 0.0]]), 0.0);
        assert_abs_diff_eq!(
            path_length(&[dvector![0.0, 0.0], dvector![3.0, 4.0]]),
            5.0
        );
        assert_abs_diff_eq!(
            path_length(&[dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![1.0, 1.0]]),
            2.0
        );
    }

    #[test]
    fn directions_are_unit_mirrored_pairs() {
        let dirs = sample_unit_directions(3, 7, 42);
        assert_eq!(dirs.len(), 7);
        for d in &dirs {
            assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-12);
        }
        for pair in dirs.chunks(2) {
            if pair.len() == 2 {
                assert_abs_diff_eq!((&pair[0] + &pair[1]).norm(), 0.0, epsilon = 1e-15);
            }
        }
        // Determinism.
        let again = sample_unit_directions(3, 7, 42);
        for (a, b) in dirs.iter().zip(again.iter()) {
            assert_eq!(a, b);
        }
    }
}
