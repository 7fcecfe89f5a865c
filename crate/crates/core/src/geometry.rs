//! Half-space representation of consistent parameter sets and the ambient
//! parameter box, plus membership, projection and interior-point utilities.
//!
//! All sets live in the flat parameter space of [`crate::param::ParamPoint`]
//! (row-major vectorization of `[A B]`). Projection is in the Euclidean
//! norm, which is the Frobenius norm in the matrix view — the same metric
//! the chase is scored in.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::conic::{
    solve_socp, SocConstraint, SocpProblem, SocpStatus, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL,
    DEFAULT_MAX_ITER,
};

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-7;
/// Normals (and regressors) below this norm are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("half-space normal has norm {0:.3e}; degenerate normals are rejected")]
    DegenerateNormal(f64),
    #[error("box bounds must satisfy lo < hi, got lo = {lo}, hi = {hi}")]
    DegenerateBox { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    BadDims { expected: usize, got: usize },
    #[error(
        "zero regressor cannot explain |x_next[{coord}]| = {residual:.6e} > W = {bound:.6e}; \
         the disturbance bound is violated"
    )]
    WViolation {
        coord: usize,
        residual: f64,
        bound: f64,
    },
    #[error("polytope is empty (conic solver certified infeasibility)")]
    Infeasible,
    #[error("support problem is unbounded along coordinate {0}")]
    Unbounded(usize),
    #[error("conic solver stalled with status {0:?}")]
    Solver(SocpStatus),
}

/// One linear inequality `normal·z ≤ offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    normal: DVector<f64>,
    offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Result<Self, GeometryError> {
        let norm = normal.norm();
        if norm <= DEGENERACY_TOL {
            return Err(GeometryError::DegenerateNormal(norm));
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `normal·z` as a plain left-to-right sum. Membership checks must agree
    /// bit-for-bit with the plant-step arithmetic, so the accumulation order
    /// is pinned here rather than left to a BLAS kernel.
    pub fn eval(&self, z: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.normal.len() {
            acc += self.normal[k] * z[k];
        }
        acc
    }
}

/// Finite conjunction of half-spaces. Emptiness is not an invariant; it is
/// discovered on demand by the conic solver.
#[derive(Debug, Clone)]
pub struct Polytope {
    halfspaces: Vec<Halfspace>,
    dim: usize,
}

impl Polytope {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        for hs in &halfspaces {
            if hs.normal.len() != dim {
                return Err(GeometryError::BadDims {
                    expected: dim,
                    got: hs.normal.len(),
                });
            }
        }
        Ok(Self { halfspaces, dim })
    }

    /// The whole space: no constraints.
    pub fn whole_space(dim: usize) -> Self {
        Self {
            halfspaces: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn is_unconstrained(&self) -> bool {
        self.halfspaces.is_empty()
    }

    /// Conjunction of two half-space systems over the same space.
    pub fn intersect(&self, other: &Polytope) -> Polytope {
        assert_eq!(self.dim, other.dim, "polytope dimensions must match");
        let mut halfspaces = self.halfspaces.clone();
        halfspaces.extend(other.halfspaces.iter().cloned());
        Polytope {
            halfspaces,
            dim: self.dim,
        }
    }

    /// True iff `normal·z ≤ offset + tol` for every half-space.
    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        assert_eq!(z.len(), self.dim, "point dimension must match polytope");
        self.halfspaces.iter().all(|hs| hs.eval(z) <= hs.offset + tol)
    }

    /// Euclidean projection of `z` onto the polytope.
    ///
    /// Interior points are returned unchanged (exactly). Otherwise solves
    /// `min t` s.t. `‖y − z‖ ≤ t`, `y` in the polytope.
    pub fn project(&self, z: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
        assert_eq!(z.len(), self.dim, "point dimension must match polytope");
        if self.contains(z, 0.0) {
            return Ok(z.clone());
        }
        let d = self.dim;
        let mut problem = SocpProblem::new(d + 1);
        problem.objective[d] = 1.0;
        let mut a = DMatrix::zeros(d, d + 1);
        for i in 0..d {
            a[(i, i)] = 1.0;
        }
        let mut t_sel = DVector::zeros(d + 1);
        t_sel[d] = 1.0;
        problem.soc_constraints.push(SocConstraint {
            a,
            b: -z.clone(),
            c: t_sel,
            d: 0.0,
        });
        for hs in &self.halfspaces {
            let mut normal = DVector::zeros(d + 1);
            normal.rows_mut(0, d).copy_from(&hs.normal);
            problem.linear_ineqs.push((normal, hs.offset));
        }
        let sol = solve_socp(&problem, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        match sol.status {
            SocpStatus::Optimal => {
                let y = sol.primal.rows(0, d).into_owned();
                debug_assert!(self.contains(&y, MEMBERSHIP_TOL));
                Ok(y)
            }
            SocpStatus::Infeasible => Err(GeometryError::Infeasible),
            other => Err(GeometryError::Solver(other)),
        }
    }

    /// Center and radius of a largest inscribed ball, by linear programming.
    ///
    /// A negative radius certifies an empty interior. An unbounded inscribed
    /// radius is reported with the `+∞` sentinel rather than an error.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64), GeometryError> {
        assert!(
            !self.halfspaces.is_empty(),
            "Chebyshev center needs at least one half-space"
        );
        let d = self.dim;
        let mut problem = SocpProblem::new(d + 1);
        problem.objective[d] = -1.0;
        for hs in &self.halfspaces {
            let mut normal = DVector::zeros(d + 1);
            normal.rows_mut(0, d).copy_from(&hs.normal);
            normal[d] = hs.normal.norm();
            problem.linear_ineqs.push((normal, hs.offset));
        }
        let sol = solve_socp(&problem, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
        match sol.status {
            SocpStatus::Optimal => Ok((sol.primal.rows(0, d).into_owned(), sol.primal[d])),
            SocpStatus::Unbounded => Ok((DVector::zeros(d), f64::INFINITY)),
            SocpStatus::Infeasible => Err(GeometryError::Infeasible),
            other => Err(GeometryError::Solver(other)),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)` via 2·dim support LPs.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>), GeometryError> {
        let d = self.dim;
        let mut lo = DVector::zeros(d);
        let mut hi = DVector::zeros(d);
        for j in 0..d {
            for (sign, out) in [(1.0, &mut lo as &mut DVector<f64>), (-1.0, &mut hi)] {
                let mut problem = SocpProblem::new(d);
                problem.objective[j] = sign;
                for hs in &self.halfspaces {
                    problem.linear_ineqs.push((hs.normal.clone(), hs.offset));
                }
                let sol =
                    solve_socp(&problem, DEFAULT_FEAS_TOL, DEFAULT_GAP_TOL, DEFAULT_MAX_ITER);
                match sol.status {
                    SocpStatus::Optimal => out[j] = sol.primal[j],
                    SocpStatus::Unbounded => return Err(GeometryError::Unbounded(j)),
                    SocpStatus::Infeasible => return Err(GeometryError::Infeasible),
                    other => return Err(GeometryError::Solver(other)),
                }
            }
        }
        Ok((lo, hi))
    }
}

/// Entrywise bounds on the parameter matrix, realizing the ambient box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBounds {
    lo: f64,
    hi: f64,
}

impl BoxBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        if !(lo < hi) {
            return Err(GeometryError::DegenerateBox { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Frobenius diameter of the induced box in dimension `dim`.
    pub fn diameter(&self, dim: usize) -> f64 {
        (dim as f64).sqrt() * (self.hi - self.lo)
    }

    /// Largest Frobenius norm over the induced box in dimension `dim`.
    pub fn norm_bound(&self, dim: usize) -> f64 {
        (dim as f64).sqrt() * self.lo.abs().max(self.hi.abs())
    }
}

impl std::fmt::Display for BoxBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// The ambient box as `2·n·(n+m)` half-spaces over the flat parameter space.
pub fn box_polytope(bounds: BoxBounds, n: usize, m: usize) -> Polytope {
    let dim = n * (n + m);
    let mut halfspaces = Vec::with_capacity(2 * dim);
    for j in 0..dim {
        let mut e = DVector::zeros(dim);
        e[j] = 1.0;
        halfspaces.push(Halfspace::new(e.clone(), bounds.hi).expect("unit normal"));
        halfspaces.push(Halfspace::new(-e, -bounds.lo).expect("unit normal"));
    }
    Polytope { halfspaces, dim }
}

/// Half-spaces consistent with one observed transition under `‖w‖_∞ ≤ W`.
///
/// For each state coordinate `i` the residual bound
/// `|x_next[i] − θᵢ·z| ≤ W` with regressor `z = [x; u]` yields the pair
/// `θᵢ·z ≤ x_next[i] + W` and `−θᵢ·z ≤ W − x_next[i]`, where `θᵢ` occupies
/// row block `i` of the flat parameter vector. Both are stored rescaled to
/// unit normals (the same sets), so constraint rows stay well conditioned
/// and membership tolerances stay meaningful however large the state grows.
/// A numerically zero regressor yields no constraints when
/// `|x_next[i]| ≤ W` (vacuous) and a `WViolation` otherwise, since no
/// parameter could explain such data.
pub fn consistent_halfspaces(
    x: &DVector<f64>,
    u: &DVector<f64>,
    x_next: &DVector<f64>,
    w_bound: f64,
) -> Result<Vec<Halfspace>, GeometryError> {
    assert!(w_bound > 0.0, "disturbance bound must be positive");
    let n = x.len();
    let m = u.len();
    if x_next.len() != n {
        return Err(GeometryError::BadDims {
            expected: n,
            got: x_next.len(),
        });
    }
    for v in [x, u, x_next] {
        assert!(v.iter().all(|c| c.is_finite()), "vectors must be finite");
    }
    let dim = n * (n + m);
    let cols = n + m;
    let mut z = DVector::zeros(cols);
    z.rows_mut(0, n).copy_from(x);
    z.rows_mut(n, m).copy_from(u);

    if z.norm() <= DEGENERACY_TOL {
        for i in 0..n {
            if x_next[i].abs() > w_bound + DEGENERACY_TOL {
                return Err(GeometryError::WViolation {
                    coord: i,
                    residual: x_next[i].abs(),
                    bound: w_bound,
                });
            }
        }
        return Ok(Vec::new());
    }

    let scale = z.norm();
    let z_unit = &z / scale;
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut normal = DVector::zeros(dim);
        normal.rows_mut(i * cols, cols).copy_from(&z_unit);
        out.push(Halfspace::new(normal.clone(), (x_next[i] + w_bound) / scale)?);
        out.push(Halfspace::new(-normal, (w_bound - x_next[i]) / scale)?);
    }
    Ok(out)
}
