//! Ratio-binned scaling: nodes are grouped by the share of their neighbors
//! that agree with their predicted class, and each group gets its own
//! temperature.

use serde::{Deserialize, Serialize};

use super::temperature::{apply_temperature, fit_temperature};
use crate::error::{Error, Result};
use crate::graph::{true_same_class_ratio, Graph};
use crate::metrics::{self, BinningScheme};
use crate::models::ModelOutput;
use crate::nn::{argmax, DenseMatrix};

/// Ratio bins with fewer validation nodes than this use the global
/// temperature.
pub const MIN_BIN_NODES: usize = 5;

/// Ratio-bin counts searched by [`select_rbs`] by default.
pub const RBS_BIN_GRID: [usize; 3] = [2, 3, 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioSource {
    /// Mean neighbor probability of the node's predicted class.
    Estimated,
    /// Share of neighbors with the node's own label.
    True,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbsParams {
    pub num_bins: usize,
    pub temperatures: Vec<f64>,
    pub fallback_temperature: f64,
    /// Bins whose temperature is the fallback because too few validation
    /// nodes fell into them.
    pub fallback_bins: Vec<bool>,
    pub source: RatioSource,
}

impl RbsParams {
    pub fn fallback_count(&self) -> usize {
        self.fallback_bins.iter().filter(|&&f| f).count()
    }
}

/// Mean over the neighbors `j` of `probabilities[j][class]`; `None` for an
/// isolated node.
pub fn estimate_ratio(g: &Graph, probabilities: &DenseMatrix, node: usize, class: usize) -> Option<f64> {
    let nb = g.neighbors(node);
    if nb.is_empty() {
        return None;
    }
    Some(nb.iter().map(|&j| probabilities.get(j, class)).sum::<f64>() / nb.len() as f64)
}

/// Ratio of every node under `source`, from uncalibrated probabilities.
pub fn node_ratios(g: &Graph, probabilities: &DenseMatrix, source: RatioSource) -> Vec<Option<f64>> {
    (0..g.num_nodes())
        .map(|i| match source {
            RatioSource::Estimated => {
                estimate_ratio(g, probabilities, i, argmax(probabilities.row(i))).map(|r| r.clamp(0.0, 1.0))
            }
            RatioSource::True => true_same_class_ratio(g, i),
        })
        .collect()
}

/// Bin of each node; `None` for isolated nodes.
fn ratio_bins(ratios: &[Option<f64>], num_bins: usize) -> Result<Vec<Option<usize>>> {
    let scheme = BinningScheme::uniform(num_bins)?;
    ratios
        .iter()
        .map(|r| r.map(|v| scheme.assign(v)).transpose())
        .collect()
}

fn fit_on(logits: &DenseMatrix, labels: &[usize], nodes: &[usize]) -> Result<f64> {
    let sub = logits.select_rows(nodes);
    let y: Vec<usize> = nodes.iter().map(|&i| labels[i]).collect();
    Ok(fit_temperature(&sub, &y)?.temperature)
}

/// Fits one temperature per ratio bin on the validation nodes `val`. With a
/// single bin every node, isolated or not, shares the global temperature.
pub fn fit_rbs(
    g: &Graph,
    uncalibrated: &ModelOutput,
    val: &[usize],
    num_bins: usize,
    source: RatioSource,
) -> Result<RbsParams> {
    if val.is_empty() {
        return Err(Error::Empty("RBS validation set"));
    }
    let global = fit_on(&uncalibrated.logits, g.labels(), val)?;
    let bins = ratio_bins(&node_ratios(g, &uncalibrated.probabilities, source), num_bins)?;
    let mut members = vec![Vec::new(); num_bins];
    for &i in val {
        if let Some(b) = bins[i] {
            members[b].push(i);
        }
    }
    let mut temperatures = Vec::with_capacity(num_bins);
    let mut fallback_bins = Vec::with_capacity(num_bins);
    for nodes in &members {
        if num_bins == 1 || nodes.len() < MIN_BIN_NODES {
            temperatures.push(global);
            fallback_bins.push(num_bins > 1);
        } else {
            temperatures.push(fit_on(&uncalibrated.logits, g.labels(), nodes)?);
            fallback_bins.push(false);
        }
    }
    Ok(RbsParams {
        num_bins,
        temperatures,
        fallback_temperature: global,
        fallback_bins,
        source,
    })
}

/// Per-node temperature scaling with the temperature of the node's ratio
/// bin. Ratios come from the same uncalibrated probabilities as in fitting.
pub fn apply_rbs(g: &Graph, uncalibrated: &ModelOutput, params: &RbsParams) -> Result<DenseMatrix> {
    let n = g.num_nodes();
    if uncalibrated.logits.rows() != n {
        return Err(Error::dims("apply_rbs", n, uncalibrated.logits.rows()));
    }
    let bins = ratio_bins(
        &node_ratios(g, &uncalibrated.probabilities, params.source),
        params.num_bins,
    )?;
    let mut out = DenseMatrix::zeros(n, uncalibrated.logits.cols());
    for (i, b) in bins.iter().enumerate() {
        let t = match b {
            Some(b) if params.num_bins > 1 => params.temperatures[*b],
            _ => params.fallback_temperature,
        };
        let row = apply_temperature(&uncalibrated.logits.select_rows(&[i]), t)?;
        out.row_mut(i).copy_from_slice(row.row(0));
    }
    Ok(out)
}

/// Fits every bin count in `grid` and keeps the one with the lowest
/// validation ECE (`ece_bins` equal-width bins). Ties keep the smaller count.
pub fn select_rbs(
    g: &Graph,
    uncalibrated: &ModelOutput,
    val: &[usize],
    grid: &[usize],
    source: RatioSource,
    ece_bins: usize,
) -> Result<RbsParams> {
    let scheme = BinningScheme::uniform(ece_bins)?;
    let mut best: Option<(f64, RbsParams)> = None;
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for m in sorted {
        let params = fit_rbs(g, uncalibrated, val, m, source)?;
        let probs = apply_rbs(g, uncalibrated, &params)?;
        let (c, ok) = metrics::confidence_and_correctness(&probs, g.labels(), val);
        let e = metrics::ece(&metrics::reliability(&c, &ok, &scheme)?)?;
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, params));
        }
    }
    best.map(|(_, p)| p).ok_or(Error::Empty("RBS bin-count grid"))
}
