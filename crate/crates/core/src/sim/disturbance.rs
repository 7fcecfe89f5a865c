//! Disturbance generators, all honoring `‖w‖_∞ ≤ W`.

use nalgebra::DVector;
use rand::Rng;

use super::SimError;

#[derive(Debug, Clone)]
pub enum DisturbanceModel {
    /// Uniform draw from a finite atom set.
    FiniteSet { atoms: Vec<DVector<f64>> },
    /// Entrywise uniform on `[−half_width, half_width]`.
    UniformBox { half_width: f64 },
    Zero,
    /// State-dependent worst case: pushes every coordinate away from zero.
    SignAdversary { magnitude: f64 },
}

/// Disturbance model plus the count of final steps forced to zero.
#[derive(Debug, Clone)]
pub struct DisturbanceSpec {
    pub model: DisturbanceModel,
    pub zero_tail: usize,
}

impl DisturbanceSpec {
    pub fn validate(&self, n: usize, w_bound: f64) -> Result<(), SimError> {
        match &self.model {
            DisturbanceModel::FiniteSet { atoms } => {
                if atoms.is_empty() {
                    return Err(SimError::Config("finite-set disturbance needs atoms".into()));
                }
                for (i, atom) in atoms.iter().enumerate() {
                    if atom.len() != n {
                        return Err(SimError::Config(format!(
                            "disturbance atom {i} has dimension {}, expected {n}",
                            atom.len()
                        )));
                    }
                    let inf = atom.amax();
                    if inf > w_bound {
                        return Err(SimError::Config(format!(
                            "disturbance atom {i} has |·|_∞ = {inf} > W = {w_bound}"
                        )));
                    }
                }
                Ok(())
            }
            DisturbanceModel::UniformBox { half_width } => {
                if *half_width < 0.0 || *half_width > w_bound {
                    return Err(SimError::Config(format!(
                        "uniform half-width {half_width} outside [0, W = {w_bound}]"
                    )));
                }
                Ok(())
            }
            DisturbanceModel::Zero => Ok(()),
            DisturbanceModel::SignAdversary { magnitude } => {
                if *magnitude < 0.0 || *magnitude > w_bound {
                    return Err(SimError::Config(format!(
                        "adversary magnitude {magnitude} outside [0, W = {w_bound}]"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Fixes the randomness for one run. Random models are pre-sampled so
    /// controllers compared on a seed face the identical disturbance
    /// sequence; the sign adversary stays state-dependent.
    pub fn realize(
        &self,
        horizon: usize,
        n: usize,
        rng: &mut impl Rng,
    ) -> DisturbanceRealization {
        let zero_from = horizon.saturating_sub(self.zero_tail);
        match &self.model {
            DisturbanceModel::Zero => DisturbanceRealization::Zero { n },
            DisturbanceModel::SignAdversary { magnitude } => DisturbanceRealization::Sign {
                magnitude: *magnitude,
                zero_from,
            },
            DisturbanceModel::FiniteSet { atoms } => {
                let seq = (0..horizon)
                    .map(|t| {
                        if t >= zero_from {
                            DVector::zeros(n)
                        } else {
                            atoms[rng.random_range(0..atoms.len())].clone()
                        }
                    })
                    .collect();
                DisturbanceRealization::Presampled(seq)
            }
            DisturbanceModel::UniformBox { half_width } => {
                let hw = *half_width;
                let seq = (0..horizon)
                    .map(|t| {
                        if t >= zero_from {
                            DVector::zeros(n)
                        } else {
                            DVector::from_fn(n, |_, _| rng.random_range(-hw..=hw))
                        }
                    })
                    .collect();
                DisturbanceRealization::Presampled(seq)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum DisturbanceRealization {
    Presampled(Vec<DVector<f64>>),
    Sign { magnitude: f64, zero_from: usize },
    Zero { n: usize },
}

impl DisturbanceRealization {
    /// Disturbance applied at transition `t → t+1`, given the state at `t`.
    pub fn w(&self, t: usize, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Presampled(seq) => seq[t].clone(),
            Self::Zero { n } => DVector::zeros(*n),
            Self::Sign {
                magnitude,
                zero_from,
            } => {
                if t >= *zero_from {
                    DVector::zeros(x.len())
                } else {
                    DVector::from_fn(x.len(), |i, _| {
                        if x[i] >= 0.0 {
                            *magnitude
                        } else {
                            -*magnitude
                        }
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_tail_is_enforced() {
        let spec = DisturbanceSpec {
            model: DisturbanceModel::FiniteSet {
                atoms: vec![dvector![3.0, 3.0], dvector![-3.0, -3.0]],
            },
            zero_tail: 10,
        };
        spec.validate(2, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = spec.realize(100, 2, &mut rng);
        let x = dvector![1.0, 1.0];
        for t in 0..100 {
            let w = real.w(t, &x);
            if t >= 90 {
                assert_eq!(w, dvector![0.0, 0.0]);
            } else {
                assert!(w.amax() <= 10.0);
            }
        }
    }

    #[test]
    fn atoms_exceeding_bound_are_rejected() {
        let spec = DisturbanceSpec {
            model: DisturbanceModel::FiniteSet {
                atoms: vec![dvector![11.0, 0.0]],
            },
            zero_tail: 0,
        };
        assert!(spec.validate(2, 10.0).is_err());
    }

    #[test]
    fn sign_adversary_pushes_outward() {
        let spec = DisturbanceSpec {
            model: DisturbanceModel::SignAdversary { magnitude: 2.0 },
            zero_tail: 0,
        };
        spec.validate(2, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = spec.realize(10, 2, &mut rng);
        assert_eq!(real.w(0, &dvector![5.0, -0.1]), dvector![2.0, -2.0]);
    }
}
