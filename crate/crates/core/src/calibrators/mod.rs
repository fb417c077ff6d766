//! Post-hoc calibrators fit on validation nodes of a trained model.
//!
//! Temperature scaling and the ratio-binned variants rescale logits, so
//! they never change a predicted label. Histogram binning, isotonic
//! regression and BBQ map the top-class confidence and are lifted back to
//! full distributions with [`apply_binary_calibrator_to_rows`].

mod bbq;
mod histogram;
mod isotonic;
mod lift;
mod ratio;
mod temperature;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bbq::{candidate_bin_counts, fit_bbq, fit_bbq_with_counts, BbqBinning, BbqModel, BBQ_PRIOR_STRENGTH};
pub use histogram::{fit_histogram, HistogramBinning};
pub use isotonic::{fit_isotonic, IsotonicMap};
pub use lift::apply_binary_calibrator_to_rows;
pub use ratio::{
    apply_rbs, estimate_ratio, fit_rbs, node_ratios, select_rbs, RatioSource, RbsParams, MIN_BIN_NODES,
    RBS_BIN_GRID,
};
pub use temperature::{
    apply_temperature, fit_temperature, scaled_nll, temperature_grid, TemperatureFit, T_MAX, T_MIN,
    T_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::{confidence_and_correctness, DEFAULT_BINS};
use crate::models::ModelOutput;
use crate::nn::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibratorKind {
    Temperature,
    Histogram,
    Isotonic,
    Bbq,
    Rbs,
    Rrbs,
}

impl CalibratorKind {
    pub const ALL: [CalibratorKind; 6] = [
        CalibratorKind::Temperature,
        CalibratorKind::Histogram,
        CalibratorKind::Isotonic,
        CalibratorKind::Bbq,
        CalibratorKind::Rbs,
        CalibratorKind::Rrbs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CalibratorKind::Temperature => "temperature",
            CalibratorKind::Histogram => "histogram",
            CalibratorKind::Isotonic => "isotonic",
            CalibratorKind::Bbq => "bbq",
            CalibratorKind::Rbs => "rbs",
            CalibratorKind::Rrbs => "rrbs",
        }
    }
}

impl std::fmt::Display for CalibratorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CalibratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let kind = match lower.as_str() {
            "ts" | "temp" => CalibratorKind::Temperature,
            "hist" | "hb" => CalibratorKind::Histogram,
            "iso" | "ir" => CalibratorKind::Isotonic,
            other => Self::ALL
                .into_iter()
                .find(|k| k.name() == other)
                .ok_or_else(|| Error::Config(format!("unknown calibrator {s:?}")))?,
        };
        Ok(kind)
    }
}

/// Knobs shared by the calibrators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    pub histogram_bins: usize,
    pub rbs_bin_grid: Vec<usize>,
    /// Bins of the validation ECE that selects the RBS bin count.
    pub ece_bins: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            histogram_bins: DEFAULT_BINS,
            rbs_bin_grid: RBS_BIN_GRID.to_vec(),
            ece_bins: DEFAULT_BINS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "params", rename_all = "lowercase")]
pub enum FittedCalibrator {
    Temperature(TemperatureFit),
    Histogram(HistogramBinning),
    Isotonic(IsotonicMap),
    Bbq(BbqModel),
    Rbs(RbsParams),
    Rrbs(RbsParams),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub validation_size: usize,
    /// Ratio-bin count picked for RBS and RRBS.
    pub chosen_bins: Option<usize>,
    /// Ratio bins that fell back to the global temperature.
    pub fallback_count: Option<usize>,
    /// Temperature optimum on the edge of the search interval.
    pub at_boundary: Option<bool>,
}

/// A fitted calibrator with its fitting metadata; the JSON form is
/// `{"method", "params", "metadata"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratorRecord {
    #[serde(flatten)]
    pub calibrator: FittedCalibrator,
    pub metadata: FitMetadata,
}

impl CalibratorRecord {
    pub fn kind(&self) -> CalibratorKind {
        match self.calibrator {
            FittedCalibrator::Temperature(_) => CalibratorKind::Temperature,
            FittedCalibrator::Histogram(_) => CalibratorKind::Histogram,
            FittedCalibrator::Isotonic(_) => CalibratorKind::Isotonic,
            FittedCalibrator::Bbq(_) => CalibratorKind::Bbq,
            FittedCalibrator::Rbs(_) => CalibratorKind::Rbs,
            FittedCalibrator::Rrbs(_) => CalibratorKind::Rrbs,
        }
    }

    /// Calibrated probabilities for every node of `g`.
    pub fn apply(&self, g: &Graph, uncalibrated: &ModelOutput) -> Result<DenseMatrix> {
        let p = &uncalibrated.probabilities;
        match &self.calibrator {
            FittedCalibrator::Temperature(t) => apply_temperature(&uncalibrated.logits, t.temperature),
            FittedCalibrator::Histogram(h) => Ok(apply_binary_calibrator_to_rows(p, |c| h.calibrate(c))),
            FittedCalibrator::Isotonic(m) => Ok(apply_binary_calibrator_to_rows(p, |c| m.calibrate(c))),
            FittedCalibrator::Bbq(m) => Ok(apply_binary_calibrator_to_rows(p, |c| m.calibrate(c))),
            FittedCalibrator::Rbs(r) | FittedCalibrator::Rrbs(r) => apply_rbs(g, uncalibrated, r),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Fits `kind` on the validation nodes `val` of `g`, given the model's
/// uncalibrated output on every node.
pub fn fit_calibrator(
    kind: CalibratorKind,
    g: &Graph,
    uncalibrated: &ModelOutput,
    val: &[usize],
    opts: &CalibrationOptions,
) -> Result<CalibratorRecord> {
    if val.is_empty() {
        return Err(Error::Empty("calibration validation set"));
    }
    let mut metadata = FitMetadata {
        validation_size: val.len(),
        ..FitMetadata::default()
    };
    let (conf, correct) = confidence_and_correctness(&uncalibrated.probabilities, g.labels(), val);
    let calibrator = match kind {
        CalibratorKind::Temperature => {
            let z = uncalibrated.logits.select_rows(val);
            let y: Vec<usize> = val.iter().map(|&i| g.labels()[i]).collect();
            let fit = fit_temperature(&z, &y)?;
            metadata.at_boundary = Some(fit.at_boundary);
            FittedCalibrator::Temperature(fit)
        }
        CalibratorKind::Histogram => {
            FittedCalibrator::Histogram(fit_histogram(&conf, &correct, opts.histogram_bins)?)
        }
        CalibratorKind::Isotonic => FittedCalibrator::Isotonic(fit_isotonic(&conf, &correct)?),
        CalibratorKind::Bbq => FittedCalibrator::Bbq(fit_bbq(&conf, &correct)?),
        CalibratorKind::Rbs | CalibratorKind::Rrbs => {
            let source = if kind == CalibratorKind::Rbs {
                RatioSource::Estimated
            } else {
                RatioSource::True
            };
            let params = select_rbs(g, uncalibrated, val, &opts.rbs_bin_grid, source, opts.ece_bins)?;
            metadata.chosen_bins = Some(params.num_bins);
            metadata.fallback_count = Some(params.fallback_count());
            if kind == CalibratorKind::Rbs {
                FittedCalibrator::Rbs(params)
            } else {
                FittedCalibrator::Rrbs(params)
            }
        }
    };
    Ok(CalibratorRecord { calibrator, metadata })
}
