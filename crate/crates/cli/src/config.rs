//! Experiment configuration: the on-disk TOML schema, validation, and
//! conversion into runnable per-(controller, seed) configurations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use chasectl_core::control::LqrWeights;
use chasectl_core::geometry::BoxBounds;
use chasectl_core::param::ParamPoint;
use chasectl_core::sim::{
    ControllerSpec, DisturbanceModel, DisturbanceSpec, LtvBuiltin, PlantModel, RunConfig,
};

fn default_samples() -> usize {
    chasectl_core::chase::DEFAULT_STEINER_SAMPLES
}

fn default_window() -> usize {
    chasectl_core::chase::DEFAULT_WINDOW_CAP
}

fn default_ridge() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub horizon: usize,
    pub w_bound: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default = "default_samples")]
    pub steiner_samples: usize,
    #[serde(default = "default_window")]
    pub window_cap: usize,
    /// Initial state; zeros when omitted.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub plant: PlantConfig,
    pub disturbance: DisturbanceConfig,
    pub theta_box: ThetaBoxConfig,
    pub weights: WeightsConfig,
    pub controllers: Vec<ControllerConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaBoxConfig {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantConfig {
    Mjls {
        modes: Vec<ModeConfig>,
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        initial_mode: usize,
    },
    LtvBuiltin {
        id: String,
    },
    Scripted {
        thetas: Vec<ModeConfig>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    FiniteSet {
        atoms: Vec<Vec<f64>>,
        #[serde(default)]
        zero_tail: usize,
    },
    UniformBox {
        half_width: f64,
        #[serde(default)]
        zero_tail: usize,
    },
    Zero,
    SignAdversary {
        magnitude: f64,
        #[serde(default)]
        zero_tail: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerConfig {
    CbcLqr {
        label: String,
        samples: Option<usize>,
        window_cap: Option<usize>,
        exploration: Option<f64>,
    },
    OlsLqr {
        label: String,
        window: usize,
        forgetting: f64,
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
    OpenLoop {
        label: String,
    },
    FixedGain {
        label: String,
        gain: Vec<Vec<f64>>,
    },
    RandomInput {
        label: String,
        magnitude: f64,
    },
}

impl ControllerConfig {
    pub fn label(&self) -> &str {
        match self {
            ControllerConfig::CbcLqr { label, .. }
            | ControllerConfig::OlsLqr { label, .. }
            | ControllerConfig::OpenLoop { label }
            | ControllerConfig::FixedGain { label, .. }
            | ControllerConfig::RandomInput { label, .. } => label,
        }
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub controllers: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub horizon: Option<usize>,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        bail!("{what}: matrix has no rows");
    }
    let cols = rows[0].len();
    if cols == 0 {
        bail!("{what}: matrix has no columns");
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            bail!("{what}: row {i} has {} entries, expected {cols}", row.len());
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn mode_point(mode: &ModeConfig, what: &str) -> Result<ParamPoint> {
    let a = matrix(&mode.a, &format!("{what}.a"))?;
    let b = matrix(&mode.b, &format!("{what}.b"))?;
    if a.nrows() != a.ncols() {
        bail!("{what}.a must be square, got {}×{}", a.nrows(), a.ncols());
    }
    if b.nrows() != a.nrows() {
        bail!(
            "{what}.b has {} rows, expected {} to match a",
            b.nrows(),
            a.nrows()
        );
    }
    Ok(ParamPoint::from_ab(a, b))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&raw)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok((cfg, raw))
    }

    pub fn plant_model(&self) -> Result<PlantModel> {
        Ok(match &self.plant {
            PlantConfig::Mjls {
                modes,
                transition,
                initial_mode,
            } => PlantModel::Mjls {
                modes: modes
                    .iter()
                    .enumerate()
                    .map(|(i, mc)| mode_point(mc, &format!("plant.modes[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
                transition: matrix(transition, "plant.transition")?,
                initial_mode: *initial_mode,
            },
            PlantConfig::LtvBuiltin { id } => PlantModel::LtvFormula {
                id: LtvBuiltin::parse(id)
                    .with_context(|| format!("plant.id: unknown builtin `{id}`"))?,
            },
            PlantConfig::Scripted { thetas } => PlantModel::Scripted {
                thetas: thetas
                    .iter()
                    .enumerate()
                    .map(|(i, mc)| mode_point(mc, &format!("plant.thetas[{i}]")))
                    .collect::<Result<Vec<_>>>()?,
            },
        })
    }

    pub fn disturbance_spec(&self) -> Result<DisturbanceSpec> {
        Ok(match &self.disturbance {
            DisturbanceConfig::FiniteSet { atoms, zero_tail } => DisturbanceSpec {
                model: DisturbanceModel::FiniteSet {
                    atoms: atoms
                        .iter()
                        .map(|a| DVector::from_vec(a.clone()))
                        .collect(),
                },
                zero_tail: *zero_tail,
            },
            DisturbanceConfig::UniformBox {
                half_width,
                zero_tail,
            } => DisturbanceSpec {
                model: DisturbanceModel::UniformBox {
                    half_width: *half_width,
                },
                zero_tail: *zero_tail,
            },
            DisturbanceConfig::Zero => DisturbanceSpec {
                model: DisturbanceModel::Zero,
                zero_tail: 0,
            },
            DisturbanceConfig::SignAdversary {
                magnitude,
                zero_tail,
            } => DisturbanceSpec {
                model: DisturbanceModel::SignAdversary {
                    magnitude: *magnitude,
                },
                zero_tail: *zero_tail,
            },
        })
    }

    pub fn weights(&self) -> Result<LqrWeights> {
        let q = matrix(&self.weights.q, "weights.q")?;
        let r = matrix(&self.weights.r, "weights.r")?;
        LqrWeights::new(q, r).map_err(|e| anyhow::anyhow!("weights: {e}"))
    }

    pub fn theta_bounds(&self) -> Result<BoxBounds> {
        BoxBounds::new(self.theta_box.lo, self.theta_box.hi)
            .map_err(|e| anyhow::anyhow!("theta_box: {e}"))
    }

    fn controller_spec(
        &self,
        cc: &ControllerConfig,
        samples_override: Option<usize>,
    ) -> Result<ControllerSpec> {
        Ok(match cc {
            ControllerConfig::CbcLqr {
                samples,
                window_cap,
                exploration,
                ..
            } => ControllerSpec::CbcLqr {
                num_samples: samples_override
                    .or(*samples)
                    .unwrap_or(self.steiner_samples),
                window_cap: window_cap.unwrap_or(self.window_cap),
                weights: self.weights()?,
                exploration: *exploration,
            },
            ControllerConfig::OlsLqr {
                window,
                forgetting,
                ridge,
                ..
            } => ControllerSpec::OlsLqr {
                window: *window,
                forgetting: *forgetting,
                ridge: *ridge,
                weights: self.weights()?,
            },
            ControllerConfig::OpenLoop { .. } => ControllerSpec::OpenLoop,
            ControllerConfig::FixedGain { gain, .. } => ControllerSpec::FixedGain {
                gain: matrix(gain, "controller.gain")?,
            },
            ControllerConfig::RandomInput { magnitude, .. } => ControllerSpec::RandomInput {
                magnitude: *magnitude,
            },
        })
    }

    /// Resolves overrides and expands into one run per (controller, seed),
    /// validating every resulting configuration.
    pub fn build_runs(
        &self,
        overrides: &Overrides,
        diagnostics: bool,
    ) -> Result<Vec<RunConfig>> {
        if self.controllers.is_empty() {
            bail!("controllers: at least one controller is required");
        }
        let mut labels: Vec<&str> = self.controllers.iter().map(|c| c.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.controllers.len() {
            bail!("controllers: labels must be unique");
        }
        if let Some(filter) = &overrides.controllers {
            for f in filter {
                if !self.controllers.iter().any(|c| c.label() == f) {
                    bail!("--controller {f}: no such controller label in config");
                }
            }
        }
        let horizon = overrides.horizon.unwrap_or(self.horizon);
        let seeds = overrides.seeds.clone().unwrap_or_else(|| self.seeds.clone());
        if seeds.is_empty() {
            bail!("seeds: at least one seed is required");
        }

        let plant = self.plant_model()?;
        let (n, _) = plant.dims();
        let x0 = match &self.x0 {
            Some(v) => {
                if v.len() != n {
                    bail!("x0 has {} entries, plant expects {n}", v.len());
                }
                DVector::from_vec(v.clone())
            }
            None => DVector::zeros(n),
        };
        let disturbance = self.disturbance_spec()?;
        let theta_box = self.theta_bounds()?;

        let mut runs = Vec::new();
        for cc in &self.controllers {
            if let Some(filter) = &overrides.controllers {
                if !filter.iter().any(|f| f == cc.label()) {
                    continue;
                }
            }
            let spec = self.controller_spec(cc, overrides.samples)?;
            for &seed in &seeds {
                let run = RunConfig {
                    plant: plant.clone(),
                    disturbance: disturbance.clone(),
                    controller: spec.clone(),
                    w_bound: self.w_bound,
                    theta_box,
                    horizon,
                    seed,
                    x0: x0.clone(),
                    label: cc.label().to_string(),
                    config_hash: String::new(),
                    chase_diagnostics: diagnostics,
                };
                run.validate()
                    .map_err(|e| anyhow::anyhow!("controller `{}`: {e}", cc.label()))?;
                runs.push(run);
            }
        }
        if runs.is_empty() {
            bail!("no runs selected (controller filter excluded everything)");
        }

        // Provenance digest over the effective resolved settings.
        let mut hasher = Sha256::new();
        hasher.update(format!("{self:?}|{overrides:?}|{horizon}|{seeds:?}").as_bytes());
        let digest = hasher.finalize();
        let hash_hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        for run in &mut runs {
            run.config_hash = hash_hex.clone();
        }
        Ok(runs)
    }
}
