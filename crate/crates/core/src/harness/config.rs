//! Experiment configuration, loadable from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrators::{CalibrationOptions, CalibratorKind};
use crate::error::{Error, Result};
use crate::graph::{load_graph_bundle, synthetic_sbm, Graph, SbmConfig};
use crate::losses::{LossConfig, LossMode, ALPHA_GRID};
use crate::metrics::DEFAULT_BINS;
use crate::models::{default_train_config, ModelKind, ModelSpec, SGC_WEIGHT_DECAY_GRID};
use crate::nn::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Bundle {
        dir: PathBuf,
        /// Scale every feature row to sum to one.
        #[serde(default = "yes")]
        normalize_features: bool,
    },
    Synthetic(SbmConfig),
}

fn yes() -> bool {
    true
}

impl DatasetSource {
    /// `sbm` or `sbm:key=value,...` (keys `blocks`, `n`, `p_in`, `p_out`,
    /// `features`, `seed`) selects a synthetic block model; anything else is
    /// a bundle directory.
    pub fn parse(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("sbm") else {
            return Ok(DatasetSource::Bundle {
                dir: PathBuf::from(s),
                normalize_features: true,
            });
        };
        let mut cfg = default_sbm();
        let rest = rest.strip_prefix(':').unwrap_or(rest);
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in {kv:?}")))?;
            let bad = || Error::Config(format!("bad value for {k}: {v:?}"));
            match k {
                "blocks" => cfg.blocks = v.parse().map_err(|_| bad())?,
                "n" => cfg.nodes_per_block = v.parse().map_err(|_| bad())?,
                "p_in" => cfg.p_in = v.parse().map_err(|_| bad())?,
                "p_out" => cfg.p_out = v.parse().map_err(|_| bad())?,
                "features" => cfg.num_features = v.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = v.parse().map_err(|_| bad())?,
                other => return Err(Error::Config(format!("unknown synthetic key {other:?}"))),
            }
        }
        Ok(DatasetSource::Synthetic(cfg))
    }

    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSource::Bundle {
                dir,
                normalize_features,
            } => {
                let g = load_graph_bundle(dir)?;
                Ok(if *normalize_features {
                    g.with_row_normalized_features()
                } else {
                    g
                })
            }
            DatasetSource::Synthetic(cfg) => synthetic_sbm(cfg),
        }
    }
}

/// Block model used when `sbm` is given without parameters.
pub fn default_sbm() -> SbmConfig {
    SbmConfig {
        blocks: 3,
        nodes_per_block: 100,
        p_in: 0.05,
        p_out: 0.005,
        num_features: 16,
        seed: 0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub model: ModelSpec,
    /// Defaults to the architecture's settings when absent.
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Weight decays tried per seed, keeping the lowest validation NLL.
    /// Defaults to the SGC grid for SGC without an explicit `train`.
    #[serde(default)]
    pub weight_decay_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub loss: LossConfig,
    /// Loss weights tried per seed with the calibration term enabled,
    /// keeping the lowest validation ECE. Defaults to [`ALPHA_GRID`].
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub calibrators: Vec<CalibratorKind>,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_bins")]
    pub num_bins: usize,
    /// Worker threads for the seed loop; all cores when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Fraction of edges removed per seed before training.
    #[serde(default)]
    pub edge_drop_fraction: Option<f64>,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

impl ExperimentConfig {
    /// Defaults for `kind` on `dataset` with seeds `0..num_seeds`.
    pub fn new(dataset: DatasetSource, kind: ModelKind, num_seeds: u64) -> Self {
        Self {
            dataset,
            model: ModelSpec::default_for(kind),
            train: None,
            weight_decay_grid: None,
            loss: LossConfig::default(),
            alpha_grid: None,
            calibrators: Vec::new(),
            calibration: CalibrationOptions::default(),
            seeds: (0..num_seeds).collect(),
            output_dir: None,
            num_bins: DEFAULT_BINS,
            jobs: None,
            edge_drop_fraction: None,
        }
    }

    /// Training settings for `seed`.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let base = self
            .train
            .clone()
            .unwrap_or_else(|| default_train_config(self.model.kind));
        TrainConfig { seed, ..base }
    }

    pub fn effective_weight_decay_grid(&self) -> Option<Vec<f64>> {
        match (&self.weight_decay_grid, &self.train) {
            (Some(g), _) => Some(g.clone()),
            (None, None) if self.model.kind == ModelKind::Sgc => Some(SGC_WEIGHT_DECAY_GRID.to_vec()),
            _ => None,
        }
    }

    pub fn effective_alpha_grid(&self) -> Vec<f64> {
        match (self.loss.mode, &self.alpha_grid) {
            (LossMode::CeOnly, _) => vec![self.loss.alpha],
            (LossMode::CePlusCal, Some(g)) => g.clone(),
            (LossMode::CePlusCal, None) => ALPHA_GRID.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let DatasetSource::Bundle { dir, .. } = &self.dataset {
            if !dir.is_dir() {
                return Err(Error::Config(format!(
                    "dataset directory {} does not exist",
                    dir.display()
                )));
            }
        }
        self.model.validate()?;
        self.train_config(0).validate()?;
        self.loss.validate()?;
        for &a in &self.effective_alpha_grid() {
            LossConfig {
                alpha: a,
                ..self.loss.clone()
            }
            .validate()?;
        }
        if let Some(g) = &self.weight_decay_grid {
            if g.is_empty() || g.iter().any(|w| w.is_nan() || *w < 0.0) {
                return Err(Error::Config(
                    "weight_decay_grid needs non-negative values".into(),
                ));
            }
        }
        if self.num_bins == 0 {
            return Err(Error::Config("num_bins must be >= 1".into()));
        }
        if self.calibration.histogram_bins == 0
            || self.calibration.ece_bins == 0
            || self.calibration.rbs_bin_grid.is_empty()
            || self.calibration.rbs_bin_grid.contains(&0)
        {
            return Err(Error::Config("calibration bin counts must be >= 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if let Some(f) = self.edge_drop_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!(
                    "edge_drop_fraction must be in [0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Reads a `.toml` or `.json` file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}
