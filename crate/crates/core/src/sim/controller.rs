//! Controllers: the chasing certainty-equivalence controller, windowed
//! least-squares baselines, and open-loop / fixed-gain / random-input
//! references.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chase::{select_hypothesis, SteinerEstimate, WorkHistory};
use crate::control::{solve_dare, LqrWeights, DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL};
use crate::geometry::{consistent_halfspaces, BoxBounds, Polytope};
use crate::param::ParamPoint;

use super::trace::DareStatus;
use super::SimError;

#[derive(Debug, Clone)]
pub enum ControllerSpec {
    /// Consistent-set chasing with certainty-equivalent LQR, optionally with
    /// additive exploration noise `η_t·𝟙`, `η_t ~ UNIF[−e, e]`.
    CbcLqr {
        num_samples: usize,
        window_cap: usize,
        weights: LqrWeights,
        exploration: Option<f64>,
    },
    /// Sliding-window least squares with exponential forgetting and ridge
    /// regularization, feeding the same certainty-equivalent LQR step.
    OlsLqr {
        window: usize,
        forgetting: f64,
        ridge: f64,
        weights: LqrWeights,
    },
    OpenLoop,
    FixedGain { gain: DMatrix<f64> },
    /// Entrywise `UNIF[−magnitude, magnitude]` inputs, no feedback.
    RandomInput { magnitude: f64 },
}

impl ControllerSpec {
    pub fn validate(&self, n: usize, m: usize) -> Result<(), SimError> {
        match self {
            Self::CbcLqr {
                num_samples,
                window_cap,
                weights,
                ..
            } => {
                if *num_samples < 1 {
                    return Err(SimError::Config("sample count must be ≥ 1".into()));
                }
                if *window_cap < 1 {
                    return Err(SimError::Config("window cap must be ≥ 1".into()));
                }
                check_weights(weights, n, m)
            }
            Self::OlsLqr {
                window,
                forgetting,
                ridge,
                weights,
            } => {
                if *window < 1 {
                    return Err(SimError::Config("window must be ≥ 1".into()));
                }
                if !(*forgetting > 0.0 && *forgetting <= 1.0) {
                    return Err(SimError::Config(format!(
                        "forgetting factor {forgetting} outside (0, 1]"
                    )));
                }
                if *ridge < 0.0 {
                    return Err(SimError::Config("ridge must be nonnegative".into()));
                }
                check_weights(weights, n, m)
            }
            Self::OpenLoop => Ok(()),
            Self::FixedGain { gain } => {
                if gain.nrows() != m || gain.ncols() != n {
                    return Err(SimError::Config(format!(
                        "fixed gain is {}×{}, expected {m}×{n}",
                        gain.nrows(),
                        gain.ncols()
                    )));
                }
                Ok(())
            }
            Self::RandomInput { magnitude } => {
                if *magnitude < 0.0 {
                    return Err(SimError::Config("input magnitude must be ≥ 0".into()));
                }
                Ok(())
            }
        }
    }
}

fn check_weights(weights: &LqrWeights, n: usize, m: usize) -> Result<(), SimError> {
    if weights.q().nrows() != n {
        return Err(SimError::Config(format!(
            "Q is {}×{}, expected {n}×{n}",
            weights.q().nrows(),
            weights.q().ncols()
        )));
    }
    if weights.r().nrows() != m {
        return Err(SimError::Config(format!(
            "R is {}×{}, expected {m}×{m}",
            weights.r().nrows(),
            weights.r().ncols()
        )));
    }
    Ok(())
}

/// Weighted ridge regression over the most recent `window` transitions.
///
/// Minimizes `Σ λ^age ‖x⁺ − θ z‖² + ridge ‖θ‖²_F` with `z = [x; u]`; rows
/// of `θ` decouple, so each is one (n+m)-dimensional normal-equation solve.
pub fn ols_estimate(
    transitions: &[(DVector<f64>, DVector<f64>, DVector<f64>)],
    window: usize,
    forgetting: f64,
    ridge: f64,
) -> ParamPoint {
    assert!(!transitions.is_empty(), "need at least one transition");
    let (x0, u0, _) = &transitions[0];
    let n = x0.len();
    let m = u0.len();
    let cols = n + m;
    let start = transitions.len().saturating_sub(window);
    let recent = &transitions[start..];

    let mut gram = DMatrix::zeros(cols, cols);
    for i in 0..cols {
        gram[(i, i)] = ridge;
    }
    let mut rhs = DMatrix::zeros(cols, n);
    for (age_rev, (x, u, x_next)) in recent.iter().rev().enumerate() {
        let weight = forgetting.powi(age_rev as i32);
        let mut z = DVector::zeros(cols);
        z.rows_mut(0, n).copy_from(x);
        z.rows_mut(n, m).copy_from(u);
        gram += weight * &z * z.transpose();
        rhs += weight * &z * x_next.transpose();
    }
    let theta_t = gram
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| DMatrix::zeros(cols, n));
    ParamPoint::from_matrix(theta_t.transpose(), n, m)
}

/// What a controller reports alongside its input for one step.
pub struct StepDecision {
    pub u: DVector<f64>,
    pub hypothesis: Option<ParamPoint>,
    pub dare: DareStatus,
    pub steiner: Option<SteinerEstimate>,
    /// Diameter proxy (union bounding box) of the active window, when chase
    /// diagnostics are enabled.
    pub window_dia: Option<f64>,
}

/// Runtime state of one controller over one run.
pub enum ControllerState {
    Cbc(CbcState),
    Ols(OlsState),
    Open { m: usize },
    Fixed(DMatrix<f64>),
    Random {
        magnitude: f64,
        rng: ChaCha8Rng,
        m: usize,
    },
}

pub struct CbcState {
    pub history: WorkHistory,
    theta_box: Polytope,
    weights: LqrWeights,
    num_samples: usize,
    exploration: Option<f64>,
    exploration_rng: ChaCha8Rng,
    /// Most recent selection, the truncation restart point.
    last_flat: DVector<f64>,
    gain: Option<DMatrix<f64>>,
    seed: u64,
    n: usize,
    m: usize,
    diagnostics: bool,
    /// Bounding boxes of the windowed requests, kept in lockstep with
    /// `history` when diagnostics are on.
    window_boxes: std::collections::VecDeque<(DVector<f64>, DVector<f64>)>,
}

pub struct OlsState {
    window: usize,
    forgetting: f64,
    ridge: f64,
    weights: LqrWeights,
    bounds: BoxBounds,
    transitions: Vec<(DVector<f64>, DVector<f64>, DVector<f64>)>,
    gain: Option<DMatrix<f64>>,
    n: usize,
    m: usize,
}

/// Derives an independent substream from the run seed.
pub fn substream(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const SALT_EXPLORATION: u64 = 3;
const SALT_STEINER: u64 = 4;
const SALT_RANDOM_INPUT: u64 = 5;

impl ControllerState {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        spec: &ControllerSpec,
        n: usize,
        m: usize,
        bounds: BoxBounds,
        theta_box: &Polytope,
        theta0_flat: &DVector<f64>,
        seed: u64,
        diagnostics: bool,
    ) -> Result<Self, SimError> {
        spec.validate(n, m)?;
        use rand::SeedableRng;
        Ok(match spec {
            ControllerSpec::CbcLqr {
                num_samples,
                window_cap,
                weights,
                exploration,
            } => ControllerState::Cbc(CbcState {
                history: WorkHistory::new(theta0_flat.clone(), *window_cap),
                theta_box: theta_box.clone(),
                weights: weights.clone(),
                num_samples: *num_samples,
                exploration: *exploration,
                exploration_rng: ChaCha8Rng::seed_from_u64(substream(seed, SALT_EXPLORATION)),
                last_flat: theta0_flat.clone(),
                gain: None,
                seed,
                n,
                m,
                diagnostics,
                window_boxes: std::collections::VecDeque::new(),
            }),
            ControllerSpec::OlsLqr {
                window,
                forgetting,
                ridge,
                weights,
            } => ControllerState::Ols(OlsState {
                window: *window,
                forgetting: *forgetting,
                ridge: *ridge,
                weights: weights.clone(),
                bounds,
                transitions: Vec::new(),
                gain: None,
                n,
                m,
            }),
            ControllerSpec::OpenLoop => ControllerState::Open { m },
            ControllerSpec::FixedGain { gain } => ControllerState::Fixed(gain.clone()),
            ControllerSpec::RandomInput { magnitude } => ControllerState::Random {
                magnitude: *magnitude,
                rng: ChaCha8Rng::seed_from_u64(substream(seed, SALT_RANDOM_INPUT)),
                m,
            },
        })
    }

    /// The hypothesis in force before any data arrives, when one exists.
    pub fn initial_hypothesis(&self) -> Option<ParamPoint> {
        match self {
            ControllerState::Cbc(state) => Some(ParamPoint::from_flat(
                &state.last_flat,
                state.n,
                state.m,
            )),
            _ => None,
        }
    }

    /// The very first input, before any transition has been observed.
    pub fn initial_input(&mut self, x0: &DVector<f64>) -> DVector<f64> {
        match self {
            ControllerState::Cbc(state) => {
                let mut u = DVector::zeros(state.m);
                state.add_exploration(&mut u);
                u
            }
            ControllerState::Ols(state) => DVector::zeros(state.m),
            ControllerState::Open { m } => DVector::zeros(*m),
            ControllerState::Fixed(gain) => &*gain * x0,
            ControllerState::Random { magnitude, rng, m } => random_input(*magnitude, rng, *m),
        }
    }

    /// Consumes the transition `(x_prev, u_prev) → x_now` observed at step
    /// `t` and returns the input to apply at `x_now`.
    pub fn step(
        &mut self,
        t: usize,
        x_prev: &DVector<f64>,
        u_prev: &DVector<f64>,
        x_now: &DVector<f64>,
        w_bound: f64,
    ) -> Result<StepDecision, SimError> {
        match self {
            ControllerState::Cbc(state) => state.step(t, x_prev, u_prev, x_now, w_bound),
            ControllerState::Ols(state) => state.step(x_prev, u_prev, x_now),
            ControllerState::Open { m } => Ok(StepDecision {
                u: DVector::zeros(*m),
                hypothesis: None,
                dare: DareStatus::NotApplicable,
                steiner: None,
                window_dia: None,
            }),
            ControllerState::Fixed(gain) => Ok(StepDecision {
                u: &*gain * x_now,
                hypothesis: None,
                dare: DareStatus::NotApplicable,
                steiner: None,
                window_dia: None,
            }),
            ControllerState::Random { magnitude, rng, m } => Ok(StepDecision {
                u: random_input(*magnitude, rng, *m),
                hypothesis: None,
                dare: DareStatus::NotApplicable,
                steiner: None,
                window_dia: None,
            }),
        }
    }
}

fn random_input(magnitude: f64, rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.random_range(-magnitude..=magnitude))
}

impl CbcState {
    fn add_exploration(&mut self, u: &mut DVector<f64>) {
        if let Some(e) = self.exploration {
            let eta: f64 = self.exploration_rng.random_range(-e..=e);
            for i in 0..u.len() {
                u[i] += eta;
            }
        }
    }

    fn step(
        &mut self,
        t: usize,
        x_prev: &DVector<f64>,
        u_prev: &DVector<f64>,
        x_now: &DVector<f64>,
        w_bound: f64,
    ) -> Result<StepDecision, SimError> {
        let halfspaces = consistent_halfspaces(x_prev, u_prev, x_now, w_bound)
            .map_err(|e| SimError::from_geometry(e, t))?;
        let data_set =
            Polytope::new(self.theta_box.dim(), halfspaces).expect("dimensioned normals");
        let request = data_set.intersect(&self.theta_box);
        if self.diagnostics {
            let bbox = request
                .bounding_box()
                .map_err(|e| SimError::from_geometry(e, t))?;
            self.window_boxes.push_back(bbox);
        }
        self.history.push(request);
        if self.history.len() > self.history.window_cap() {
            let restart = self.last_flat.clone();
            self.history.truncate(&restart);
            while self.window_boxes.len() > self.history.len() {
                self.window_boxes.pop_front();
            }
        }
        let window_dia = if self.diagnostics {
            let d = self.theta_box.dim();
            let mut lo = DVector::from_element(d, f64::INFINITY);
            let mut hi = DVector::from_element(d, f64::NEG_INFINITY);
            for (blo, bhi) in &self.window_boxes {
                for i in 0..d {
                    lo[i] = lo[i].min(blo[i]);
                    hi[i] = hi[i].max(bhi[i]);
                }
            }
            Some((&hi - &lo).norm())
        } else {
            None
        };

        let estimate = select_hypothesis(
            &self.history,
            self.num_samples,
            substream(substream(self.seed, SALT_STEINER), t as u64),
        )
        .map_err(|e| SimError::from_chase(e, t))?;
        self.last_flat = estimate.projected.clone();
        let hypothesis = ParamPoint::from_flat(&estimate.projected, self.n, self.m);

        let dare = match solve_dare(
            &hypothesis,
            &self.weights,
            DEFAULT_DARE_TOL,
            DEFAULT_DARE_MAX_ITER,
        ) {
            Ok(sol) => {
                self.gain = Some(sol.k);
                DareStatus::Ok
            }
            // Numerically non-stabilizable hypothesis: hold the previous
            // gain (zero before the first success) and flag the step.
            Err(_) => DareStatus::Fallback,
        };
        let gain = self
            .gain
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.m, self.n));
        let mut u = &gain * x_now;
        self.add_exploration(&mut u);
        Ok(StepDecision {
            u,
            hypothesis: Some(hypothesis),
            dare,
            steiner: Some(estimate),
            window_dia,
        })
    }
}

impl OlsState {
    fn step(
        &mut self,
        x_prev: &DVector<f64>,
        u_prev: &DVector<f64>,
        x_now: &DVector<f64>,
    ) -> Result<StepDecision, SimError> {
        self.transitions
            .push((x_prev.clone(), u_prev.clone(), x_now.clone()));
        if self.transitions.len() > self.window {
            let excess = self.transitions.len() - self.window;
            self.transitions.drain(0..excess);
        }
        let raw = ols_estimate(&self.transitions, self.window, self.forgetting, self.ridge);
        // Clip into the ambient box for parity with the chasing controller
        // and to avoid synthesizing on wildly infeasible estimates.
        let hypothesis = raw.clamp_entrywise(self.bounds.lo(), self.bounds.hi());
        let dare = match solve_dare(
            &hypothesis,
            &self.weights,
            DEFAULT_DARE_TOL,
            DEFAULT_DARE_MAX_ITER,
        ) {
            Ok(sol) => {
                self.gain = Some(sol.k);
                DareStatus::Ok
            }
            Err(_) => DareStatus::Fallback,
        };
        let gain = self
            .gain
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.m, self.n));
        let u = &gain * x_now;
        Ok(StepDecision {
            u,
            hypothesis: Some(hypothesis),
            dare,
            steiner: None,
            window_dia: None,
        })
    }
}
