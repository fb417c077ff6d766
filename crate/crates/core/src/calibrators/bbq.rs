//! Bayesian binning into quantiles: a posterior-weighted average over
//! several equal-frequency binnings, each bin carrying a Beta posterior on
//! its accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BinningScheme;

/// Strength `α₀ + β₀` of each bin's Beta prior.
pub const BBQ_PRIOR_STRENGTH: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbqBinning {
    pub scheme: BinningScheme,
    /// Posterior mean accuracy per bin.
    pub posterior_means: Vec<f64>,
    pub log_marginal: f64,
    pub weight: f64,
}

impl BbqBinning {
    fn calibrate(&self, confidence: f64) -> f64 {
        self.posterior_means[self.scheme.assign(confidence).expect("clamped")]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbqModel {
    pub binnings: Vec<BbqBinning>,
}

impl BbqModel {
    /// Normalizes the binning weights from their log marginal likelihoods
    /// under a uniform prior over binnings.
    pub fn from_binnings(mut binnings: Vec<BbqBinning>) -> Result<Self> {
        if binnings.is_empty() {
            return Err(Error::Empty("BBQ binnings"));
        }
        let max = binnings
            .iter()
            .map(|b| b.log_marginal)
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = binnings.iter().map(|b| (b.log_marginal - max).exp()).sum();
        for b in &mut binnings {
            b.weight = (b.log_marginal - max).exp() / total;
        }
        Ok(Self { binnings })
    }

    pub fn calibrate(&self, confidence: f64) -> f64 {
        let c = confidence.clamp(0.0, 1.0);
        self.binnings.iter().map(|b| b.weight * b.calibrate(c)).sum()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Bin counts tried by [`fit_bbq`] for `n` validation samples.
pub fn candidate_bin_counts(n: usize) -> Vec<usize> {
    let root = (n as f64).cbrt();
    let lo = ((root / 2.0).floor() as usize).max(1);
    let hi = ((2.0 * root).ceil() as usize).min(n.max(1));
    (lo..=hi.max(lo)).collect()
}

/// Boundaries splitting the sorted confidences into `bins` groups of
/// near-equal size. Cut points fall halfway between neighboring samples;
/// coincident cuts are merged.
fn equal_frequency_scheme(sorted: &[f64], bins: usize) -> Result<BinningScheme> {
    let n = sorted.len();
    let mut edges = vec![0.0];
    for k in 1..bins {
        let idx = ((k * n) as f64 / bins as f64).round() as usize;
        if idx == 0 || idx >= n {
            continue;
        }
        let cut = (sorted[idx - 1] + sorted[idx]) / 2.0;
        if cut > *edges.last().expect("non-empty") && cut < 1.0 {
            edges.push(cut);
        }
    }
    edges.push(1.0);
    BinningScheme::from_boundaries(edges)
}

fn fit_binning(confidences: &[f64], correct: &[bool], scheme: BinningScheme) -> Result<BbqBinning> {
    let m = scheme.num_bins();
    let mut n = vec![0.0; m];
    let mut k = vec![0.0; m];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = scheme.assign(c)?;
        n[b] += 1.0;
        k[b] += ok as u8 as f64;
    }
    let mut log_marginal = 0.0;
    let mut posterior_means = Vec::with_capacity(m);
    for b in 0..m {
        let (lo, hi) = scheme.bounds(b);
        let mid = (lo + hi) / 2.0;
        let a0 = BBQ_PRIOR_STRENGTH * mid;
        let b0 = BBQ_PRIOR_STRENGTH * (1.0 - mid);
        log_marginal += ln_beta(k[b] + a0, n[b] - k[b] + b0) - ln_beta(a0, b0);
        posterior_means.push((k[b] + a0) / (n[b] + a0 + b0));
    }
    Ok(BbqBinning {
        scheme,
        posterior_means,
        log_marginal,
        weight: 0.0,
    })
}

/// BBQ over the given equal-frequency bin counts.
pub fn fit_bbq_with_counts(confidences: &[f64], correct: &[bool], counts: &[usize]) -> Result<BbqModel> {
    if confidences.len() != correct.len() {
        return Err(Error::dims("fit_bbq", confidences.len(), correct.len()));
    }
    if confidences.is_empty() {
        return Err(Error::Empty("BBQ validation set"));
    }
    if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidArgument(format!("confidence {c} outside [0, 1]")));
    }
    let mut sorted = confidences.to_vec();
    sorted.sort_by(f64::total_cmp);
    let binnings = counts
        .iter()
        .map(|&b| fit_binning(confidences, correct, equal_frequency_scheme(&sorted, b.max(1))?))
        .collect::<Result<Vec<_>>>()?;
    BbqModel::from_binnings(binnings)
}

pub fn fit_bbq(confidences: &[f64], correct: &[bool]) -> Result<BbqModel> {
    fit_bbq_with_counts(confidences, correct, &candidate_bin_counts(confidences.len()))
}
