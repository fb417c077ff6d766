//! Histogram binning: every confidence bin is mapped to the validation
//! accuracy observed inside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BinningScheme;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBinning {
    pub scheme: BinningScheme,
    /// Calibrated score per bin.
    pub scores: Vec<f64>,
}

impl HistogramBinning {
    /// Inputs outside `[0, 1]` are clamped.
    pub fn calibrate(&self, confidence: f64) -> f64 {
        let b = self.scheme.assign(confidence.clamp(0.0, 1.0)).expect("clamped");
        self.scores[b]
    }
}

/// Bin `m` gets the mean correctness of its validation samples; an empty
/// bin gets its midpoint.
pub fn fit_histogram(confidences: &[f64], correct: &[bool], num_bins: usize) -> Result<HistogramBinning> {
    if confidences.len() != correct.len() {
        return Err(Error::dims("fit_histogram", confidences.len(), correct.len()));
    }
    if confidences.is_empty() {
        return Err(Error::Empty("histogram validation set"));
    }
    let scheme = BinningScheme::uniform(num_bins)?;
    let mut hits = vec![0usize; num_bins];
    let mut count = vec![0usize; num_bins];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = scheme.assign(c)?;
        count[b] += 1;
        hits[b] += ok as usize;
    }
    let scores = (0..num_bins)
        .map(|b| {
            if count[b] == 0 {
                let (lo, hi) = scheme.bounds(b);
                (lo + hi) / 2.0
            } else {
                hits[b] as f64 / count[b] as f64
            }
        })
        .collect();
    Ok(HistogramBinning { scheme, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn all_correct_gives_one_in_occupied_bins() {
        let h = fit_histogram(&[0.3, 0.55, 0.9], &[true; 3], 10).unwrap();
        for c in [0.3, 0.55, 0.9] {
            assert_eq!(h.calibrate(c), 1.0);
        }
        assert_eq!(h.calibrate(0.05), 0.05);
    }

    #[test]
    fn mixed_bin_is_its_mean() {
        let h = fit_histogram(&[0.61, 0.62], &[true, false], 5).unwrap();
        assert_eq!(h.calibrate(0.65), 0.5);
    }

    #[test]
    fn matches_per_bin_mean_oracle() {
        let mut r = crate::rng::stream(1, "hist");
        let conf: Vec<f64> = (0..50).map(|_| r.random::<f64>()).collect();
        let correct: Vec<bool> = (0..50).map(|_| r.random::<bool>()).collect();
        let h = fit_histogram(&conf, &correct, 7).unwrap();
        for m in 0..7 {
            let lo = m as f64 / 7.0;
            let hi = (m + 1) as f64 / 7.0;
            let members: Vec<usize> = (0..50)
                .filter(|&i| (conf[i] > lo || (m == 0 && conf[i] >= lo)) && conf[i] <= hi)
                .collect();
            let expect = if members.is_empty() {
                (lo + hi) / 2.0
            } else {
                members.iter().filter(|&&i| correct[i]).count() as f64 / members.len() as f64
            };
            assert!((h.scores[m] - expect).abs() < 1e-12);
        }
    }
}
