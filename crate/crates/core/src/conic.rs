//! Narrow second-order cone programming interface.
//!
//! Problems are stated as `min c·z` subject to linear inequalities `a·z ≤ b`
//! and second-order cone constraints `‖Az + b‖ ≤ c·z + d`. Linear programs
//! are the special case with an empty cone list; there is no separate LP
//! path. The backend is the Clarabel interior-point solver; the contract
//! here is the post-condition (feasibility and gap tolerances on `Optimal`
//! results), not the algorithm.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT,
    SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

/// Default feasibility tolerance.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
/// Default duality-gap tolerance.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Default interior-point iteration cap.
pub const DEFAULT_MAX_ITER: u32 = 200;

/// A second-order cone constraint `‖A z + b‖ ≤ c·z + d`.
#[derive(Debug, Clone)]
pub struct SocConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

/// A cone program `min objective·z` over linear and second-order constraints.
#[derive(Debug, Clone)]
pub struct SocpProblem {
    pub num_vars: usize,
    pub objective: DVector<f64>,
    /// Each entry `(a, b)` constrains `a·z ≤ b`.
    pub linear_ineqs: Vec<(DVector<f64>, f64)>,
    pub soc_constraints: Vec<SocConstraint>,
}

impl SocpProblem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: DVector::zeros(num_vars),
            linear_ineqs: Vec::new(),
            soc_constraints: Vec::new(),
        }
    }

    fn check_dims(&self) {
        assert_eq!(self.objective.len(), self.num_vars, "objective dimension");
        assert!(
            self.objective.iter().all(|v| v.is_finite()),
            "objective must be finite"
        );
        for (a, _) in &self.linear_ineqs {
            assert_eq!(a.len(), self.num_vars, "linear constraint dimension");
        }
        for soc in &self.soc_constraints {
            assert_eq!(soc.a.ncols(), self.num_vars, "cone matrix dimension");
            assert_eq!(soc.a.nrows(), soc.b.len(), "cone offset dimension");
            assert_eq!(soc.c.len(), self.num_vars, "cone rhs dimension");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Primal/dual residuals and duality gap reported by the solver.
#[derive(Debug, Clone, Copy)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub status: SocpStatus,
    pub primal: DVector<f64>,
    pub objective_value: f64,
    pub residuals: Residuals,
}

/// Sparse triplet accumulator converted to CSC for the solver.
struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    fn into_csc(mut self) -> CscMatrix<f64> {
        self.entries
            .sort_by(|x, y| (x.1, x.0).cmp(&(y.1, y.0)));
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..self.ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix::new(self.nrows, self.ncols, colptr, rowval, nzval)
    }
}

/// Solves the cone program. Solver failures are carried in the returned
/// status, never raised; callers branch on `status`.
///
/// Deterministic: identical problems yield identical results.
pub fn solve_socp(
    problem: &SocpProblem,
    feas_tol: f64,
    gap_tol: f64,
    max_iter: u32,
) -> SocpSolution {
    problem.check_dims();
    let n = problem.num_vars;
    let num_lin = problem.linear_ineqs.len();
    let soc_rows: usize = problem
        .soc_constraints
        .iter()
        .map(|s| s.a.nrows() + 1)
        .sum();
    let total_rows = num_lin + soc_rows;

    let mut a = TripletMatrix::new(total_rows, n);
    let mut b = vec![0.0; total_rows];
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    for (row, (normal, offset)) in problem.linear_ineqs.iter().enumerate() {
        for (col, &v) in normal.iter().enumerate() {
            a.push(row, col, v);
        }
        b[row] = *offset;
    }
    if num_lin > 0 {
        cones.push(NonnegativeConeT(num_lin));
    }

    // Cone rows encode s = b − Az ∈ SOC, with s₀ = c·z + d on the first row
    // and s₁.. = A_soc z + b_soc below it.
    let mut row = num_lin;
    for soc in &problem.soc_constraints {
        for (col, &v) in soc.c.iter().enumerate() {
            a.push(row, col, -v);
        }
        b[row] = soc.d;
        row += 1;
        for i in 0..soc.a.nrows() {
            for col in 0..n {
                a.push(row, col, -soc.a[(i, col)]);
            }
            b[row] = soc.b[i];
            row += 1;
        }
        cones.push(SecondOrderConeT(soc.a.nrows() + 1));
    }

    let p = CscMatrix::zeros((n, n));
    let q: Vec<f64> = problem.objective.iter().cloned().collect();
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(max_iter)
        .tol_feas(feas_tol)
        .tol_gap_abs(gap_tol)
        .tol_gap_rel(gap_tol)
        .build()
        .expect("static solver settings");

    let mut solver = DefaultSolver::new(&p, &q, &a.into_csc(), &b, &cones, settings)
        .expect("dimension-checked problem data");
    solver.solve();
    let sol = &solver.solution;

    let status = match sol.status {
        SolverStatus::Solved => SocpStatus::Optimal,
        SolverStatus::PrimalInfeasible => SocpStatus::Infeasible,
        SolverStatus::DualInfeasible => SocpStatus::Unbounded,
        _ => SocpStatus::MaxIter,
    };
    let primal = DVector::from_vec(sol.x.clone());
    let solution = SocpSolution {
        status,
        primal,
        objective_value: sol.obj_val,
        residuals: Residuals {
            primal: sol.r_prim,
            dual: sol.r_dual,
            gap: (sol.obj_val - sol.obj_val_dual).abs(),
        },
    };
    #[cfg(debug_assertions)]
    if solution.status == SocpStatus::Optimal {
        let scale = 1.0
            + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
            + solution.primal.amax();
        let viol = max_violation(problem, &solution.primal);
        debug_assert!(
            viol <= 50.0 * feas_tol.max(1e-9) * scale,
            "optimal point violates raw constraints by {viol:.3e} (scale {scale:.3e})"
        );
    }
    solution
}

/// Largest raw constraint violation of `z`, zero when feasible.
pub fn max_violation(problem: &SocpProblem, z: &DVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (a, b) in &problem.linear_ineqs {
        worst = worst.max(a.dot(z) - b);
    }
    for soc in &problem.soc_constraints {
        let lhs = (&soc.a * z + &soc.b).norm();
        let rhs = soc.c.dot(z) + soc.d;
        worst = worst.max(lhs - rhs);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_ball_minimum() {
        // minimize z s.t. ‖z‖ ≤ 1: optimum −1 at z = −1.
        let mut p = SocpProblem::new(1);
        p.objective[0] = 1.0;
        p.soc_constraints.push(SocConstraint {
            a: DMatrix::identity(1, 1),
            b: DVector::zeros(1),
            c: DVector::zeros(1),
            d: 1.0,
        });
        let sol = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective_value, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.primal[0], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn epigraph_distance_to_point() {
        // minimize t s.t. ‖z − (3,4)‖ ≤ t: optimum 0 at z = (3,4).
        let mut p = SocpProblem::new(3);
        p.objective[2] = 1.0;
        let mut a = DMatrix::zeros(2, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        p.soc_constraints.push(SocConstraint {
            a,
            b: DVector::from_vec(vec![-3.0, -4.0]),
            c: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            d: 0.0,
        });
        let sol = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective_value, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.primal[0], 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(sol.primal[1], 4.0, epsilon = 1e-4);
    }

    #[test]
    fn min_norm_over_halfplane() {
        // minimize ‖z‖ s.t. z₁ + z₂ ≥ 2: optimum √2 at (1,1).
        let mut p = SocpProblem::new(3);
        p.objective[2] = 1.0;
        let mut a = DMatrix::zeros(2, 3);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        p.soc_constraints.push(SocConstraint {
            a,
            b: DVector::zeros(2),
            c: DVector::from_vec(vec![0.0, 0.0, 1.0]),
            d: 0.0,
        });
        p.linear_ineqs
            .push((DVector::from_vec(vec![-1.0, -1.0, 0.0]), -2.0));
        let sol = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.status, SocpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective_value, 2.0_f64.sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(sol.primal[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.primal[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn infeasible_and_unbounded_status() {
        // x ≤ 0 and −x ≤ −1 cannot both hold.
        let mut p = SocpProblem::new(1);
        p.objective[0] = 1.0;
        p.linear_ineqs.push((DVector::from_vec(vec![1.0]), 0.0));
        p.linear_ineqs.push((DVector::from_vec(vec![-1.0]), -1.0));
        let sol = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.status, SocpStatus::Infeasible);

        // minimize x with only x ≤ 1: unbounded below.
        let mut p = SocpProblem::new(1);
        p.objective[0] = 1.0;
        p.linear_ineqs.push((DVector::from_vec(vec![1.0]), 1.0));
        let sol = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(sol.status, SocpStatus::Unbounded);
    }

    #[test]
    fn identical_problems_solve_identically() {
        let mut p = SocpProblem::new(2);
        p.objective = DVector::from_vec(vec![1.0, -0.5]);
        p.linear_ineqs
            .push((DVector::from_vec(vec![1.0, 1.0]), 1.0));
        p.soc_constraints.push(SocConstraint {
            a: DMatrix::identity(2, 2),
            b: DVector::zeros(2),
            c: DVector::zeros(2),
            d: 2.0,
        });
        let s1 = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        let s2 = solve_socp(&p, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        assert_eq!(s1.status, s2.status);
        assert_eq!(s1.objective_value.to_bits(), s2.objective_value.to_bits());
        for (a, b) in s1.primal.iter().zip(s2.primal.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
