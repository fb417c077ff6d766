//! One-axis sweeps over an experiment config.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{run_experiment_on, RunRecord, StageSummary};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Width,
    Depth,
    /// Fraction of edges removed.
    Density,
    LossAlpha,
    WeightDecay,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Width => "width",
            SweepAxis::Depth => "depth",
            SweepAxis::Density => "density",
            SweepAxis::LossAlpha => "loss-alpha",
            SweepAxis::WeightDecay => "weight-decay",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "width" => Ok(SweepAxis::Width),
            "depth" => Ok(SweepAxis::Depth),
            "density" | "edge-drop" => Ok(SweepAxis::Density),
            "loss-alpha" | "alpha" => Ok(SweepAxis::LossAlpha),
            "weight-decay" | "wd" => Ok(SweepAxis::WeightDecay),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub stages: Vec<StageSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn positive_integer(axis: SweepAxis, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!(
            "{} values must be positive integers, got {v}",
            axis.name()
        )))
    }
}

/// `base` with the swept field set to `value`.
pub fn apply_axis(base: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::Width => cfg.model.width = positive_integer(axis, value)?,
        SweepAxis::Depth => cfg.model.depth = positive_integer(axis, value)?,
        SweepAxis::Density => {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "density values are drop fractions in [0, 1], got {value}"
                )));
            }
            cfg.edge_drop_fraction = Some(value);
        }
        SweepAxis::LossAlpha => {
            cfg.loss = LossConfig {
                mode: LossMode::CePlusCal,
                alpha: value,
                ..cfg.loss
            };
            cfg.alpha_grid = Some(vec![value]);
        }
        SweepAxis::WeightDecay => {
            if value.is_nan() || value < 0.0 {
                return Err(Error::Config(format!("weight decay must be >= 0, got {value}")));
            }
            let mut t = cfg.train_config(0);
            t.weight_decay = value;
            cfg.train = Some(t);
            cfg.weight_decay_grid = None;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One experiment per axis value on the graph of `spec.base`.
pub fn run_sweep(spec: &SweepSpec) -> Result<(SweepTable, Vec<RunRecord>)> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs = spec
        .values
        .iter()
        .map(|&v| apply_axis(&spec.base, spec.axis, v))
        .collect::<Result<Vec<_>>>()?;
    let g = spec.base.dataset.load()?;
    let mut rows = Vec::with_capacity(configs.len());
    let mut records = Vec::with_capacity(configs.len());
    for (cfg, &value) in configs.iter().zip(&spec.values) {
        log::info!("sweep {} = {value}", spec.axis.name());
        let rec = run_experiment_on(cfg, &g)?;
        rows.push(SweepRow {
            value,
            stages: rec.summary.clone(),
        });
        records.push(rec);
    }
    Ok((
        SweepTable {
            axis: spec.axis,
            rows,
        },
        records,
    ))
}
