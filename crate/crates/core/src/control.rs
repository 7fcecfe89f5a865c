//! Linear-quadratic control and discrete Lyapunov primitives.
//!
//! `solve_dare` runs fixed-point value iteration from `P₀ = Q`, which is
//! robust at the problem sizes handled here (n ≤ 4) and fails loudly on
//! hypotheses that are numerically non-stabilizable, so the caller can fall
//! back to its previous gain.

use nalgebra::{Cholesky, DMatrix};
use thiserror::Error;

use crate::param::ParamPoint;

/// Default relative tolerance for the Riccati iteration.
pub const DEFAULT_DARE_TOL: f64 = 1e-10;
/// Default iteration cap for the Riccati iteration.
pub const DEFAULT_DARE_MAX_ITER: usize = 10_000;
/// Value-matrix norm beyond which the iteration is declared divergent.
const DIVERGENCE_BOUND: f64 = 1e14;
/// Stability margin below 1 required of `ρ(F)` before the Lyapunov solve.
const DLYAP_STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ControlError {
    /// The Riccati iteration exceeded its budget or the value matrix
    /// diverged: the hypothesis is numerically non-stabilizable.
    #[error("Riccati iteration did not converge after {iterations} iterations (|P| = {p_norm:.3e})")]
    NonConvergent { iterations: usize, p_norm: f64 },
    /// The Lyapunov series diverges for this matrix.
    #[error("spectral radius {rho} is not below 1; Lyapunov series diverges")]
    Unstable { rho: f64 },
    #[error("cost matrix is not symmetric within {0:.1e}")]
    AsymmetricWeight(f64),
    #[error("cost matrix has minimum eigenvalue {0:.3e}; must be positive definite")]
    IndefiniteWeight(f64),
}

/// Positive-definite state and input cost matrices.
#[derive(Debug, Clone)]
pub struct LqrWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

const SYMMETRY_TOL: f64 = 1e-10;

impl LqrWeights {
    /// Validates symmetry (within 1e-10) and positive definiteness.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, ControlError> {
        for w in [&q, &r] {
            let skew = (w - w.transpose()).norm();
            if skew > SYMMETRY_TOL {
                return Err(ControlError::AsymmetricWeight(skew));
            }
            let min_eig = w
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if min_eig <= 0.0 {
                return Err(ControlError::IndefiniteWeight(min_eig));
            }
        }
        Ok(Self { q, r })
    }

    /// `Q = I_n`, `R = I_m`.
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            q: DMatrix::identity(n, n),
            r: DMatrix::identity(m, m),
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Output of `solve_dare`: value matrix, feedback gain and diagnostics.
///
/// Sign convention: the gain carries the minus sign, so the control is
/// applied as `u = K x` and the closed loop is `A + B K`.
#[derive(Debug, Clone)]
pub struct LqrSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One application of the Riccati map together with the gain it induces.
fn riccati_map(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let atp = a.transpose() * p;
    let btp = b.transpose() * p;
    let gram = r + &btp * b;
    let chol = Cholesky::new(gram)?;
    let k = -chol.solve(&(&btp * a));
    let p_next = q + &atp * a + (&atp * b) * &k;
    // Symmetrize to stop round-off skew from accumulating over iterations.
    let p_next = (&p_next + p_next.transpose()) * 0.5;
    Some((p_next, k))
}

/// Synthesizes the infinite-horizon LQR solution for the hypothesis `θ`.
///
/// Iterates `P ← Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA` from `P₀ = Q` until the
/// relative step change and the fixed-point residual both fall below `tol`,
/// then checks that the closed loop `A + BK` is strictly stable.
pub fn solve_dare(
    theta: &ParamPoint,
    weights: &LqrWeights,
    tol: f64,
    max_iter: usize,
) -> Result<LqrSolution, ControlError> {
    let a = theta.a();
    let b = theta.b();
    let q = weights.q();
    let r = weights.r();
    assert_eq!(q.nrows(), theta.n(), "Q does not match state dimension");
    assert_eq!(r.nrows(), theta.m(), "R does not match input dimension");

    let mut p = q.clone();
    for it in 1..=max_iter {
        let Some((p_next, _)) = riccati_map(&p, &a, &b, q, r) else {
            return Err(ControlError::NonConvergent {
                iterations: it,
                p_norm: p.norm(),
            });
        };
        let change = (&p_next - &p).norm();
        let scale = 1.0 + p_next.norm();
        if !p_next.norm().is_finite() || p_next.norm() > DIVERGENCE_BOUND {
            return Err(ControlError::NonConvergent {
                iterations: it,
                p_norm: p_next.norm(),
            });
        }
        p = p_next;
        if change <= tol * scale {
            // One more map application measures the true fixed-point residual.
            let Some((p_check, k_check)) = riccati_map(&p, &a, &b, q, r) else {
                return Err(ControlError::NonConvergent {
                    iterations: it,
                    p_norm: p.norm(),
                });
            };
            let residual = (&p_check - &p).norm();
            if residual > tol * scale {
                continue;
            }
            let closed = &a + &b * &k_check;
            let rho = spectral_radius(&closed);
            if rho >= 1.0 {
                return Err(ControlError::NonConvergent {
                    iterations: it,
                    p_norm: p.norm(),
                });
            }
            return Ok(LqrSolution {
                p,
                k: k_check,
                iterations: it,
                residual,
            });
        }
    }
    Err(ControlError::NonConvergent {
        iterations: max_iter,
        p_norm: p.norm(),
    })
}

/// Solves the discrete Lyapunov equation `X − FᵀXF = M` by squaring.
///
/// Accumulates `X_{k+1} = X_k + G_kᵀ X_k G_k`, `G_{k+1} = G_k²`, which sums
/// the series `Σ (Fᵀ)^i M F^i` in logarithmically many steps.
pub fn dlyap(f: &DMatrix<f64>, m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>, ControlError> {
    assert_eq!(f.nrows(), f.ncols(), "F must be square");
    assert_eq!(m.nrows(), m.ncols(), "M must be square");
    assert_eq!(f.nrows(), m.nrows(), "F and M must share dimensions");
    let rho = spectral_radius(f);
    if rho >= 1.0 - DLYAP_STABILITY_MARGIN {
        return Err(ControlError::Unstable { rho });
    }

    let mut x = m.clone();
    let mut g = f.clone();
    for _ in 0..200 {
        let increment = g.transpose() * &x * &g;
        x += &increment;
        if increment.norm() <= (tol * 1e-2).min(1e-16 * (1.0 + x.norm())) {
            break;
        }
        g = &g * &g;
    }
    let x = (&x + x.transpose()) * 0.5;
    debug_assert!((&x - f.transpose() * &x * f - m).norm() <= tol * (1.0 + x.norm()));
    Ok(x)
}

/// Maximum eigenvalue modulus, via a dense Schur-based eigensolve.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
    assert!(m.iter().all(|v| v.is_finite()), "matrix must be finite");
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_theta(a: f64, b: f64) -> ParamPoint {
        ParamPoint::from_ab(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
        )
    }

    #[test]
    fn dare_zero_dynamics_gives_p_equals_q() {
        let sol = solve_dare(
            &scalar_theta(0.0, 1.0),
            &LqrWeights::identity(1, 1),
            DEFAULT_DARE_TOL,
            DEFAULT_DARE_MAX_ITER,
        )
        .unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.k[(0, 0)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn dare_scalar_golden_ratio() {
        // A=2, B=1, Q=R=1: P² − 4P − 1 = 0, so P = 2 + √5.
        let sol = solve_dare(
            &scalar_theta(2.0, 1.0),
            &LqrWeights::identity(1, 1),
            DEFAULT_DARE_TOL,
            DEFAULT_DARE_MAX_ITER,
        )
        .unwrap();
        let p_expected = 2.0 + 5.0_f64.sqrt();
        let k_expected = -2.0 * p_expected / (1.0 + p_expected);
        assert_abs_diff_eq!(sol.p[(0, 0)], p_expected, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.k[(0, 0)], k_expected, epsilon = 1e-6);
        assert_abs_diff_eq!(2.0 + sol.k[(0, 0)], 0.38196601, epsilon = 1e-6);
        assert!(sol.residual <= 1e-8);
    }

    /// Straightforward value iteration written independently of `solve_dare`.
    fn value_iteration_oracle(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut p = q.clone();
        loop {
            let gram = (r + b.transpose() * &p * b).try_inverse().unwrap();
            let k = -(&gram * b.transpose() * &p * a);
            let p_next = q + a.transpose() * &p * a + a.transpose() * &p * b * &k;
            let done = (&p_next - &p).norm() < 1e-12;
            p = p_next;
            if done {
                let gram = (r + b.transpose() * &p * b).try_inverse().unwrap();
                let k = -(&gram * b.transpose() * &p * a);
                return (p, k);
            }
        }
    }

    #[test]
    fn dare_matches_value_iteration_oracle_on_jump_mode_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 0.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let theta = ParamPoint::from_ab(a.clone(), b.clone());
        let weights = LqrWeights::identity(2, 1);
        let sol = solve_dare(&theta, &weights, 1e-12, DEFAULT_DARE_MAX_ITER).unwrap();
        let (p_oracle, k_oracle) = value_iteration_oracle(&a, &b, weights.q(), weights.r());
        assert!((&sol.k - &k_oracle).norm() < 1e-9, "gain mismatch");
        assert!((&sol.p - &p_oracle).norm() < 1e-8, "value mismatch");
        assert!(spectral_radius(&(&a + &b * &sol.k)) < 1.0);
    }

    #[test]
    fn dare_rejects_unstabilizable_hypothesis() {
        // Unstable A with B = 0 cannot be stabilized; the iteration diverges.
        let err = solve_dare(
            &scalar_theta(1.5, 0.0),
            &LqrWeights::identity(1, 1),
            DEFAULT_DARE_TOL,
            DEFAULT_DARE_MAX_ITER,
        )
        .unwrap_err();
        assert!(matches!(err, ControlError::NonConvergent { .. }));
    }

    #[test]
    fn dlyap_trivial_and_scalar() {
        let x = dlyap(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3), 1e-12).unwrap();
        assert!((x - DMatrix::identity(3, 3)).norm() < 1e-14);

        let x = dlyap(
            &DMatrix::from_element(1, 1, 0.5),
            &DMatrix::from_element(1, 1, 1.0),
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dlyap_rejects_unstable() {
        let f = DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 0.2]);
        let err = dlyap(&f, &DMatrix::identity(2, 2), 1e-10).unwrap_err();
        assert!(matches!(err, ControlError::Unstable { .. }));
    }

    #[test]
    fn spectral_radius_examples() {
        assert_abs_diff_eq!(spectral_radius(&DMatrix::identity(3, 3)), 1.0, epsilon = 1e-12);
        let nilpotent = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(spectral_radius(&nilpotent), 0.0, epsilon = 1e-12);
        let tri = DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 0.0, 0.5]);
        assert_abs_diff_eq!(spectral_radius(&tri), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn weights_validation() {
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(LqrWeights::new(skew, DMatrix::identity(1, 1)).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(LqrWeights::new(indef, DMatrix::identity(1, 1)).is_err());
    }
}
