//! Calibration and accuracy metrics.
//!
//! Bins follow one convention everywhere: the first bin is closed
//! `[b₀, b₁]`, every later bin is half-open `(b_{m-1}, b_m]`. Bin indices in
//! this API are 0-based.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{true_same_class_ratio, Graph};
use crate::nn::{argmax, DenseMatrix};

/// Bin count used for ECE and MECE unless configured otherwise.
pub const DEFAULT_BINS: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    boundaries: Vec<f64>,
}

impl BinningScheme {
    /// `m` equal-width bins over `[0, 1]`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("bin count must be >= 1".into()));
        }
        let boundaries = (0..=m).map(|i| i as f64 / m as f64).collect();
        Ok(Self { boundaries })
    }

    /// Arbitrary strictly increasing boundaries from 0 to 1.
    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2
            || boundaries[0] != 0.0
            || *boundaries.last().expect("len >= 2") != 1.0
            || boundaries
                .windows(2)
                .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidArgument(
                "bin boundaries must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn num_bins(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// `(lower, upper)` edges of bin `m`.
    pub fn bounds(&self, m: usize) -> (f64, f64) {
        (self.boundaries[m], self.boundaries[m + 1])
    }

    pub fn assign(&self, value: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidArgument(format!(
                "value {value} outside [0, 1] cannot be binned"
            )));
        }
        // first upper edge >= value
        let upper = &self.boundaries[1..];
        let m = upper.partition_point(|&b| b < value);
        Ok(m.min(self.num_bins() - 1))
    }
}

/// 0-based bin index of `value` under `scheme`.
pub fn assign_bin(value: f64, scheme: &BinningScheme) -> Result<usize> {
    scheme.assign(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub accuracy: Option<f64>,
    pub mean_confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityDiagram {
    pub bins: Vec<BinStats>,
    pub total: usize,
}

impl ReliabilityDiagram {
    /// `bin_lo,bin_hi,count,accuracy,mean_confidence`, one row per bin;
    /// empty bins leave the last two cells blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,accuracy,mean_confidence\n");
        for b in &self.bins {
            let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                b.lower,
                b.upper,
                b.count,
                opt(b.accuracy),
                opt(b.mean_confidence)
            );
        }
        out
    }

    pub fn mean_confidence(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let s: f64 = self
            .bins
            .iter()
            .filter_map(|b| b.mean_confidence.map(|c| c * b.count as f64))
            .sum();
        Some(s / self.total as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let s: f64 = self
            .bins
            .iter()
            .filter_map(|b| b.accuracy.map(|a| a * b.count as f64))
            .sum();
        Some(s / self.total as f64)
    }
}

pub fn reliability(
    confidences: &[f64],
    correct: &[bool],
    scheme: &BinningScheme,
) -> Result<ReliabilityDiagram> {
    if confidences.len() != correct.len() {
        return Err(Error::dims("reliability", confidences.len(), correct.len()));
    }
    let m = scheme.num_bins();
    let mut count = vec![0usize; m];
    let mut hits = vec![0usize; m];
    let mut conf = vec![0.0f64; m];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let b = scheme.assign(c)?;
        count[b] += 1;
        hits[b] += ok as usize;
        conf[b] += c;
    }
    let bins = (0..m)
        .map(|b| {
            let (lower, upper) = scheme.bounds(b);
            let n = count[b];
            BinStats {
                lower,
                upper,
                count: n,
                accuracy: (n > 0).then(|| hits[b] as f64 / n as f64),
                mean_confidence: (n > 0).then(|| conf[b] / n as f64),
            }
        })
        .collect();
    Ok(ReliabilityDiagram {
        bins,
        total: confidences.len(),
    })
}

/// Expected calibration error: count-weighted mean `|acc − conf|` gap.
pub fn ece(diagram: &ReliabilityDiagram) -> Result<f64> {
    if diagram.total == 0 {
        return Err(Error::Empty("ECE of an empty diagram"));
    }
    let n = diagram.total as f64;
    Ok(diagram
        .bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| {
            let acc = b.accuracy.expect("occupied bin");
            let conf = b.mean_confidence.expect("occupied bin");
            b.count as f64 / n * (acc - conf).abs()
        })
        .sum())
}

/// Marginal ECE. For each class `k` the samples are binned by their class-k
/// probability; per bin the label count and probability mass of class `k`
/// are compared. `weights` defaults to `1/K` per class.
pub fn mece(
    probabilities: &DenseMatrix,
    labels: &[usize],
    scheme: &BinningScheme,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let (n, k) = probabilities.shape();
    if labels.len() != n {
        return Err(Error::dims("mece", n, labels.len()));
    }
    if n == 0 {
        return Err(Error::Empty("MECE over zero samples"));
    }
    for (i, row) in probabilities.row_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "probability row {i} sums to {s}, not 1"
            )));
        }
    }
    let uniform = vec![1.0 / k as f64; k];
    let w = weights.unwrap_or(&uniform);
    if w.len() != k {
        return Err(Error::dims("mece weights", k, w.len()));
    }
    let m = scheme.num_bins();
    let mut total = 0.0;
    for (class, &weight) in w.iter().enumerate() {
        let mut label_count = vec![0.0f64; m];
        let mut mass = vec![0.0f64; m];
        for (i, &y) in labels.iter().enumerate() {
            let p = probabilities.get(i, class).clamp(0.0, 1.0);
            let b = scheme.assign(p)?;
            mass[b] += p;
            if y == class {
                label_count[b] += 1.0;
            }
        }
        let gap: f64 = label_count
            .iter()
            .zip(&mass)
            .map(|(c, s)| (c - s).abs() / n as f64)
            .sum();
        total += weight * gap;
    }
    Ok(total)
}

/// Mean negative log-probability of the true class over `mask`.
pub fn nll(probabilities: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("NLL mask"));
    }
    let s: f64 = mask
        .iter()
        .map(|&i| -probabilities.get(i, labels[i]).max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(s / mask.len() as f64)
}

pub fn accuracy(probabilities: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("accuracy mask"));
    }
    let hits = mask
        .iter()
        .filter(|&&i| argmax(probabilities.row(i)) == labels[i])
        .count();
    Ok(hits as f64 / mask.len() as f64)
}

pub fn confidence_histogram(confidences: &[f64], scheme: &BinningScheme) -> Result<Vec<usize>> {
    let mut counts = vec![0; scheme.num_bins()];
    for &c in confidences {
        counts[scheme.assign(c)?] += 1;
    }
    Ok(counts)
}

/// Top-class confidences and correctness flags for the rows in `mask`.
pub fn confidence_and_correctness(
    probabilities: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
) -> (Vec<f64>, Vec<bool>) {
    mask.iter()
        .map(|&i| {
            let row = probabilities.row(i);
            let k = argmax(row);
            (row[k].clamp(0.0, 1.0), k == labels[i])
        })
        .unzip()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub ece: f64,
    pub mece: f64,
    pub nll: f64,
    pub reliability: ReliabilityDiagram,
    pub confidence_histogram: Vec<usize>,
}

/// Every metric of `probabilities` on the nodes in `mask`.
pub fn evaluate(
    probabilities: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
    scheme: &BinningScheme,
) -> Result<MetricsReport> {
    let (conf, correct) = confidence_and_correctness(probabilities, labels, mask);
    let diagram = reliability(&conf, &correct, scheme)?;
    let sub = probabilities.select_rows(mask);
    let sub_labels: Vec<usize> = mask.iter().map(|&i| labels[i]).collect();
    Ok(MetricsReport {
        accuracy: accuracy(probabilities, labels, mask)?,
        ece: ece(&diagram)?,
        mece: mece(&sub, &sub_labels, scheme, None)?,
        nll: nll(probabilities, labels, mask)?,
        confidence_histogram: confidence_histogram(&conf, scheme)?,
        reliability: diagram,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioGapBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Groups the nodes of `eval_mask` by true same-class-neighbor ratio into
/// `bins` equal-width bins and reports mean confidence and accuracy per bin.
/// Isolated nodes have no ratio and are skipped.
pub fn ratio_gap_analysis(
    g: &Graph,
    probabilities: &DenseMatrix,
    eval_mask: &[usize],
    bins: usize,
) -> Result<Vec<RatioGapBin>> {
    let scheme = BinningScheme::uniform(bins)?;
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for &i in eval_mask {
        let Some(r) = true_same_class_ratio(g, i) else {
            continue;
        };
        let b = scheme.assign(r)?;
        let row = probabilities.row(i);
        let k = argmax(row);
        count[b] += 1;
        conf[b] += row[k];
        hits[b] += (k == g.labels()[i]) as usize;
    }
    Ok((0..bins)
        .map(|b| {
            let (lower, upper) = scheme.bounds(b);
            let n = count[b];
            RatioGapBin {
                lower,
                upper,
                count: n,
                mean_confidence: (n > 0).then(|| conf[b] / n as f64),
                accuracy: (n > 0).then(|| hits[b] as f64 / n as f64),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Splits;

    const CONFS: [f64; 4] = [0.9, 0.8, 0.3, 0.4];
    const CORRECT: [bool; 4] = [true, false, false, true];

    #[test]
    fn bin_edges_follow_the_convention() {
        let s15 = BinningScheme::uniform(15).unwrap();
        assert_eq!(assign_bin(1.0 / 15.0, &s15).unwrap(), 0);
        assert_eq!(assign_bin(1.0, &s15).unwrap(), 14);
        assert_eq!(assign_bin(0.0, &s15).unwrap(), 0);
        let s2 = BinningScheme::uniform(2).unwrap();
        assert_eq!(assign_bin(0.5000001, &s2).unwrap(), 1);
        assert_eq!(assign_bin(0.5, &s2).unwrap(), 0);
        assert!(assign_bin(1.0001, &s2).is_err());
        assert!(assign_bin(-0.1, &s2).is_err());
        for m in 1..20 {
            let s = BinningScheme::uniform(m).unwrap();
            for b in 1..=m {
                assert_eq!(s.assign(s.boundaries()[b]).unwrap(), b - 1);
            }
        }
    }

    #[test]
    fn bad_boundaries_rejected() {
        assert!(BinningScheme::from_boundaries(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(BinningScheme::from_boundaries(vec![0.1, 1.0]).is_err());
        assert!(BinningScheme::uniform(0).is_err());
    }

    #[test]
    fn four_sample_reliability_and_ece() {
        let s = BinningScheme::uniform(2).unwrap();
        let d = reliability(&CONFS, &CORRECT, &s).unwrap();
        assert_eq!(d.bins[0].count, 2);
        assert!((d.bins[0].accuracy.unwrap() - 0.5).abs() < 1e-15);
        assert!((d.bins[0].mean_confidence.unwrap() - 0.35).abs() < 1e-15);
        assert!((d.bins[1].accuracy.unwrap() - 0.5).abs() < 1e-15);
        assert!((d.bins[1].mean_confidence.unwrap() - 0.85).abs() < 1e-15);
        assert!((ece(&d).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(confidence_histogram(&CONFS, &s).unwrap(), vec![2, 2]);
    }

    #[test]
    fn ece_extremes() {
        let s = BinningScheme::uniform(15).unwrap();
        let perfect = reliability(&[1.0; 5], &[true; 5], &s).unwrap();
        assert_eq!(perfect.bins.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(ece(&perfect).unwrap(), 0.0);
        let wrong = reliability(&[1.0; 5], &[false; 5], &s).unwrap();
        assert_eq!(ece(&wrong).unwrap(), 1.0);
        let empty = reliability(&[], &[], &s).unwrap();
        assert!(empty.bins.iter().all(|b| b.count == 0 && b.accuracy.is_none()));
        assert!(ece(&empty).is_err());
        assert!(reliability(&[0.5], &[], &s).is_err());
        assert_eq!(confidence_histogram(&[1.0; 3], &s).unwrap()[14], 3);
        assert!(confidence_histogram(&[], &s).unwrap().iter().all(|&c| c == 0));
    }

    #[test]
    fn mece_examples() {
        let s1 = BinningScheme::uniform(1).unwrap();
        let p = DenseMatrix::from_rows(&[[0.6, 0.4], [0.6, 0.4]]);
        // class 0: |1 - 1.2| / 2 = 0.1, class 1: |1 - 0.8| / 2 = 0.1
        assert!((mece(&p, &[0, 1], &s1, None).unwrap() - 0.1).abs() < 1e-12);
        let onehot = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        let s = BinningScheme::uniform(15).unwrap();
        assert_eq!(mece(&onehot, &[0, 2, 1], &s, None).unwrap(), 0.0);
        let uniform = DenseMatrix::filled(4, 2, 0.5);
        assert!(mece(&uniform, &[0, 1, 0, 1], &s1, None).unwrap().abs() < 1e-15);
        let bad = DenseMatrix::from_rows(&[[0.6, 0.6]]);
        assert!(mece(&bad, &[0], &s1, None).is_err());
    }

    #[test]
    fn nll_examples() {
        let onehot = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(nll(&onehot, &[0, 1], &[0, 1]).unwrap(), 0.0);
        let u = DenseMatrix::filled(3, 4, 0.25);
        assert!((nll(&u, &[0, 3, 1], &[0, 1, 2]).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert!(nll(&u, &[0, 3, 1], &[]).is_err());
        let p = DenseMatrix::from_rows(&[[0.2, 0.8], [0.7, 0.3], [0.5, 0.5]]);
        let direct = -(0.8f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((nll(&p, &[1, 0, 0], &[0, 1]).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn reliability_csv_has_one_row_per_bin() {
        let s = BinningScheme::uniform(15).unwrap();
        let d = reliability(&CONFS, &CORRECT, &s).unwrap();
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), 16);
        assert!(csv.lines().nth(1).unwrap().ends_with("0,,"));
    }

    #[test]
    fn ratio_gap_bins() {
        // triangle of class 0 plus a pendant node of class 1 attached to node 0
        let g = Graph::new(
            5,
            [(0, 1), (0, 2), (1, 2), (0, 3)],
            DenseMatrix::zeros(5, 1),
            vec![0, 0, 0, 1, 0],
            2,
            Splits::default(),
        )
        .unwrap();
        let p = DenseMatrix::from_rows(&[[0.9, 0.1], [0.8, 0.2], [0.7, 0.3], [0.6, 0.4], [0.5, 0.5]]);
        let bins = ratio_gap_analysis(&g, &p, &[0, 1, 2, 3, 4], 5).unwrap();
        // node 3 has ratio 0 -> first bin; node 4 is isolated and skipped
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[0].accuracy, Some(0.0));
        assert_eq!(bins[3].count, 1); // node 0: 2/3
        assert_eq!(bins[4].count, 2);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 4);
    }
}
