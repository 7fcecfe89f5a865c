//! Plant models: Markov jump systems, a built-in drifting LTV system, and
//! scripted parameter sequences.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::param::ParamPoint;

use super::SimError;

/// Built-in time-varying systems available by identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtvBuiltin {
    /// Two-state, one-input system whose off-diagonal and oscillatory terms
    /// drift with the step index; the (0,0) entry is pinned at 1.5 so the
    /// open loop stays unstable throughout.
    Drift2x1,
}

impl LtvBuiltin {
    pub fn parse(id: &str) -> Option<Self> {
        match id {
            "drift2x1" => Some(Self::Drift2x1),
            _ => None,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Drift2x1 => "drift2x1",
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Drift2x1 => (2, 1),
        }
    }
}

/// Parameter matrices of the built-in drifting system at step `k`.
pub fn ltv_example_theta(k: usize) -> ParamPoint {
    let kf = k as f64;
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            1.5,
            0.0025 * kf,
            -0.1 * (0.3 * kf).cos(),
            1.0 + 0.05_f64.powf(1.5) * (0.5 * kf).sin() * kf.sqrt(),
        ],
    );
    let b = DMatrix::from_row_slice(2, 1, &[0.05, 0.05 * (0.1 * kf + 2.0) / (0.1 * kf + 3.0)]);
    ParamPoint::from_ab(a, b)
}

/// The true system generating the data, before randomness is realized.
#[derive(Debug, Clone)]
pub enum PlantModel {
    /// Markov jump system: mode matrices and a row-stochastic transition
    /// matrix, sampled once per run.
    Mjls {
        modes: Vec<ParamPoint>,
        transition: DMatrix<f64>,
        initial_mode: usize,
    },
    /// Built-in closed-form time-varying system.
    LtvFormula { id: LtvBuiltin },
    /// Explicit list `θ_0, …, θ_T` (cycled if shorter than the horizon).
    Scripted { thetas: Vec<ParamPoint> },
}

/// Realized parameter sequence for one run: `θ_0, …, θ_T` and, for jump
/// systems, the mode index per step.
#[derive(Debug, Clone)]
pub struct PlantRealization {
    pub thetas: Vec<ParamPoint>,
    pub modes: Option<Vec<usize>>,
}

impl PlantModel {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Mjls { modes, .. } => (modes[0].n(), modes[0].m()),
            Self::LtvFormula { id } => id.dims(),
            Self::Scripted { thetas } => (thetas[0].n(), thetas[0].m()),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            Self::Mjls {
                modes,
                transition,
                initial_mode,
            } => {
                if modes.is_empty() {
                    return Err(SimError::Config("jump system needs at least one mode".into()));
                }
                let (n, m) = (modes[0].n(), modes[0].m());
                if modes.iter().any(|t| t.n() != n || t.m() != m) {
                    return Err(SimError::Config(
                        "all mode matrices must share dimensions".into(),
                    ));
                }
                if transition.nrows() != modes.len() || transition.ncols() != modes.len() {
                    return Err(SimError::Config(
                        "transition matrix must be square over the mode count".into(),
                    ));
                }
                if *initial_mode >= modes.len() {
                    return Err(SimError::Config("initial mode out of range".into()));
                }
                for r in 0..transition.nrows() {
                    let row_sum: f64 = transition.row(r).iter().sum();
                    if (row_sum - 1.0).abs() > 1e-12 {
                        return Err(SimError::Config(format!(
                            "transition row {r} sums to {row_sum}, not 1"
                        )));
                    }
                    if transition.row(r).iter().any(|&p| p < 0.0) {
                        return Err(SimError::Config(format!(
                            "transition row {r} has a negative entry"
                        )));
                    }
                }
                Ok(())
            }
            Self::LtvFormula { .. } => Ok(()),
            Self::Scripted { thetas } => {
                if thetas.is_empty() {
                    return Err(SimError::Config("scripted plant needs at least one θ".into()));
                }
                let (n, m) = (thetas[0].n(), thetas[0].m());
                if thetas.iter().any(|t| t.n() != n || t.m() != m) {
                    return Err(SimError::Config(
                        "all scripted matrices must share dimensions".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Samples the parameter sequence for `horizon + 1` steps. Jump-mode
    /// randomness is drawn here, once per run, so every controller compared
    /// on the same seed faces the identical `θ_t` sequence.
    pub fn realize(&self, horizon: usize, rng: &mut impl Rng) -> PlantRealization {
        match self {
            Self::Mjls {
                modes,
                transition,
                initial_mode,
            } => {
                let mut mode = *initial_mode;
                let mut mode_seq = Vec::with_capacity(horizon + 1);
                let mut thetas = Vec::with_capacity(horizon + 1);
                for t in 0..=horizon {
                    if t > 0 {
                        mode = mjls_next_mode(transition, mode, rng);
                    }
                    mode_seq.push(mode);
                    thetas.push(modes[mode].clone());
                }
                PlantRealization {
                    thetas,
                    modes: Some(mode_seq),
                }
            }
            Self::LtvFormula { id } => {
                let thetas = (0..=horizon)
                    .map(|k| match id {
                        LtvBuiltin::Drift2x1 => ltv_example_theta(k),
                    })
                    .collect();
                PlantRealization {
                    thetas,
                    modes: None,
                }
            }
            Self::Scripted { thetas } => {
                let seq = (0..=horizon)
                    .map(|t| thetas[t.min(thetas.len() - 1)].clone())
                    .collect();
                PlantRealization {
                    thetas: seq,
                    modes: None,
                }
            }
        }
    }
}

/// One step of the dynamics: `x⁺ = A x + B u + w`.
///
/// Each output coordinate is one left-to-right accumulation over the `A`
/// row, the `B` row, then the disturbance — the same order the half-space
/// membership check uses, so consistency flags are exact even on divergent
/// open-loop trajectories.
pub fn step_plant(
    theta: &ParamPoint,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> DVector<f64> {
    let n = theta.n();
    let m = theta.m();
    assert_eq!(x.len(), n, "state dimension mismatch");
    assert_eq!(u.len(), m, "input dimension mismatch");
    assert_eq!(w.len(), n, "disturbance dimension mismatch");
    let mat = theta.matrix();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += mat[(i, j)] * x[j];
        }
        for l in 0..m {
            acc += mat[(i, n + l)] * u[l];
        }
        acc += w[i];
        out[i] = acc;
    }
    out
}

/// Samples the next mode from row `mode` of the transition matrix.
pub fn mjls_next_mode(pi: &DMatrix<f64>, mode: usize, rng: &mut impl Rng) -> usize {
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    for j in 0..pi.ncols() {
        cumulative += pi[(mode, j)];
        if draw < cumulative {
            return j;
        }
    }
    pi.ncols() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_plant_examples() {
        let identity = ParamPoint::from_ab(DMatrix::identity(2, 2), DMatrix::zeros(2, 1));
        let x = dvector![3.0, -1.5];
        assert_eq!(
            step_plant(&identity, &x, &dvector![0.7], &dvector![0.0, 0.0]),
            x
        );

        let theta = ParamPoint::from_matrix(
            DMatrix::from_row_slice(2, 3, &[1.5, 1.0, 0.0, 0.0, 0.5, 1.0]),
            2,
            1,
        );
        let next = step_plant(&theta, &dvector![1.0, 0.0], &dvector![0.0], &dvector![0.0, 0.0]);
        assert_eq!(next, dvector![1.5, 0.0]);

        // w = −Ax − Bu cancels exactly.
        let x = dvector![1.0, 2.0];
        let u = dvector![0.5];
        let drive = step_plant(&theta, &x, &u, &dvector![0.0, 0.0]);
        let cancelled = step_plant(&theta, &x, &u, &(-&drive));
        assert_eq!(cancelled, dvector![0.0, 0.0]);
    }

    #[test]
    fn mode_sampling_matches_transition_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pi = DMatrix::identity(2, 2);
        for _ in 0..100 {
            assert_eq!(mjls_next_mode(&pi, 1, &mut rng), 1);
        }
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(mjls_next_mode(&flip, 0, &mut rng), 1);

        // Empirical row frequencies within 0.01 over 1e5 draws.
        let pi = DMatrix::from_row_slice(2, 2, &[0.8, 0.2, 0.1, 0.9]);
        let mut counts = [0usize; 2];
        let draws = 100_000;
        for _ in 0..draws {
            counts[mjls_next_mode(&pi, 0, &mut rng)] += 1;
        }
        assert_abs_diff_eq!(counts[0] as f64 / draws as f64, 0.8, epsilon = 0.01);

        // Long-run occupancy of the chain approaches (1/3, 2/3).
        let mut mode = 0;
        let mut in_zero = 0usize;
        for _ in 0..draws {
            mode = mjls_next_mode(&pi, mode, &mut rng);
            in_zero += usize::from(mode == 0);
        }
        assert_abs_diff_eq!(in_zero as f64 / draws as f64, 1.0 / 3.0, epsilon = 0.02);
    }

    #[test]
    fn ltv_formula_values() {
        let theta0 = ltv_example_theta(0);
        let a0 = theta0.a();
        assert_abs_diff_eq!(a0[(0, 0)], 1.5);
        assert_abs_diff_eq!(a0[(0, 1)], 0.0);
        assert_abs_diff_eq!(a0[(1, 0)], -0.1);
        assert_abs_diff_eq!(a0[(1, 1)], 1.0);
        let b0 = theta0.b();
        assert_abs_diff_eq!(b0[(0, 0)], 0.05);
        assert_abs_diff_eq!(b0[(1, 0)], 0.05 * 2.0 / 3.0, epsilon = 1e-12);

        assert_abs_diff_eq!(ltv_example_theta(400).a()[(0, 1)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            ltv_example_theta(1000).b()[(1, 0)],
            0.05 * 102.0 / 103.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(ltv_example_theta(1000).b()[(1, 0)], 0.049514, epsilon = 1e-6);
    }
}
