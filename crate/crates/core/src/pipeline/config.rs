use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ded::{AdamConfig, LossConfig, TrainConfig};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::read_json;
use crate::pathgen::{AugmentConfig, DEFAULT_ALPHAS};
use crate::shapegen::MvnSpec;

/// Named SWR strengths for the desk-scale grid. The penalty sums squared
/// differences over every first-layer row, so useful strengths depend on
/// grid and hidden size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwrPreset {
    None,
    Small,
    Large,
}

impl SwrPreset {
    pub const ALL: [SwrPreset; 3] = [SwrPreset::None, SwrPreset::Small, SwrPreset::Large];

    pub fn lambda(self) -> f64 {
        match self {
            SwrPreset::None => 0.0,
            SwrPreset::Small => 1e-6,
            SwrPreset::Large => 1e-5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SwrPreset::None => "none",
            SwrPreset::Small => "small",
            SwrPreset::Large => "large",
        }
    }
}

impl std::str::FromStr for SwrPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SwrPreset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown SWR preset `{s}` (none, small, large)")))
    }
}

/// Every knob of the end-to-end pipeline. Missing fields in a config file
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid: GridSpec,
    /// MVN shape-parameter file; the bundled default when absent.
    pub shape_spec: Option<PathBuf>,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub alphas: [f64; 4],
    pub augment: AugmentConfig,
    /// Stopping threshold of the PV landmark walk.
    pub pv_eps: f64,
    pub septum_sigma_mm: f64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub optimizer: AdamConfig,
    pub output_prior: bool,
}

pub fn desk_grid() -> GridSpec {
    GridSpec::centered(24, 5.0).expect("valid desk grid")
}

/// The 45^3 lattice at 2.666 mm.
pub fn paper_grid() -> GridSpec {
    GridSpec::centered(45, 2.666).expect("valid paper grid")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            grid: desk_grid(),
            shape_spec: None,
            n_train: 200,
            n_test: 50,
            seed: 0,
            alphas: DEFAULT_ALPHAS,
            augment: AugmentConfig::default(),
            pv_eps: 0.1,
            septum_sigma_mm: 3.0,
            hidden: train.hidden,
            epochs: train.epochs,
            batch_size: train.batch_size,
            loss: train.loss,
            optimizer: train.optimizer,
            output_prior: train.output_prior,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub spacing_mm: Option<f64>,
    pub lambda_swr: Option<f64>,
    pub epochs: Option<usize>,
}

impl PipelineConfig {
    /// Defaults, then `file`, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg: PipelineConfig = match file {
            Some(f) => read_json(f)?,
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if overrides.grid.is_some() || overrides.spacing_mm.is_some() {
            let n = overrides.grid.unwrap_or(cfg.grid.dims[0]);
            let spacing = overrides.spacing_mm.unwrap_or(cfg.grid.spacing_mm);
            cfg.grid = GridSpec::centered(n, spacing)?;
        }
        if let Some(l) = overrides.lambda_swr {
            cfg.loss.lambda_swr = l;
        }
        if let Some(e) = overrides.epochs {
            cfg.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.augment.validate()?;
        self.loss.validate()?;
        if self.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidConfig(format!("alphas must be finite and >= 0: {:?}", self.alphas)));
        }
        if !(self.pv_eps > 0.0) || !(self.septum_sigma_mm >= 0.0) {
            return Err(Error::InvalidConfig("pv_eps must be > 0 and septum_sigma_mm >= 0".into()));
        }
        if self.n_train == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("n_train and batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn shape_spec(&self) -> Result<MvnSpec> {
        let spec = match &self.shape_spec {
            Some(p) => read_json(p)?,
            None => MvnSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            loss: self.loss,
            optimizer: self.optimizer,
            output_prior: self.output_prior,
        }
    }
}
