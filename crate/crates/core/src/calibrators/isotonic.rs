//! Isotonic regression of correctness on confidence by pool-adjacent
//! violators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-decreasing right-continuous step function on `[0, 1]`: the value at
/// `x` is `values[k]` for the last `k` with `breakpoints[k] <= x`, and
/// `values[0]` left of the first breakpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicMap {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidArgument(
                "isotonic map needs matching, non-empty breakpoints and values".into(),
            ));
        }
        if breakpoints
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(Error::InvalidArgument(
                "isotonic breakpoints must increase".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] > w[1]) || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "isotonic values must be non-decreasing and within [0, 1]".into(),
            ));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn calibrate(&self, confidence: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= confidence);
        self.values[k.saturating_sub(1)]
    }
}

/// Weighted PAVA. Samples with equal confidence are pooled before the
/// violator pass, so every block starts at a distinct confidence.
pub fn fit_isotonic(confidences: &[f64], correct: &[bool]) -> Result<IsotonicMap> {
    if confidences.len() != correct.len() {
        return Err(Error::dims("fit_isotonic", confidences.len(), correct.len()));
    }
    if confidences.is_empty() {
        return Err(Error::Empty("isotonic validation set"));
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[a].total_cmp(&confidences[b]));
    // (confidence, weight, mean) per distinct confidence
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for i in order {
        let (c, y) = (confidences[i], correct[i] as u8 as f64);
        match groups.last_mut() {
            Some(last) if last.0 == c => {
                last.2 = (last.2 * last.1 + y) / (last.1 + 1.0);
                last.1 += 1.0;
            }
            _ => groups.push((c, 1.0, y)),
        }
    }
    let mut blocks: Vec<(f64, f64, f64)> = Vec::with_capacity(groups.len());
    for group in groups {
        blocks.push(group);
        while blocks.len() > 1 && blocks[blocks.len() - 2].2 >= blocks[blocks.len() - 1].2 {
            let (_, w2, m2) = blocks.pop().expect("len > 1");
            let last = blocks.last_mut().expect("len > 0");
            last.2 = (last.2 * last.1 + m2 * w2) / (last.1 + w2);
            last.1 += w2;
        }
    }
    let (breakpoints, values) = blocks.into_iter().map(|(c, _, m)| (c, m)).unzip();
    IsotonicMap::new(breakpoints, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_input_is_reproduced() {
        let m = fit_isotonic(&[0.1, 0.4, 0.7, 0.9], &[false, false, true, true]).unwrap();
        assert_eq!(m.values(), &[0.0, 1.0]);
        assert_eq!(m.calibrate(0.4), 0.0);
        assert_eq!(m.calibrate(0.69), 0.0);
        assert_eq!(m.calibrate(0.7), 1.0);
        assert_eq!(m.calibrate(0.0), 0.0);
    }

    #[test]
    fn single_violation_pools() {
        let m = fit_isotonic(&[0.2, 0.8], &[true, false]).unwrap();
        assert_eq!(m.values(), &[0.5]);
        assert_eq!(m.calibrate(0.2), 0.5);
        assert_eq!(m.calibrate(0.8), 0.5);
    }

    #[test]
    fn decreasing_values_fail_construction() {
        assert!(IsotonicMap::new(vec![0.1, 0.5], vec![0.6, 0.4]).is_err());
        assert!(IsotonicMap::new(vec![0.5, 0.1], vec![0.4, 0.6]).is_err());
    }

    /// Exhaustive search over contiguous groupings of the distinct sorted
    /// confidences, keeping monotone groupings with the smallest squared
    /// error.
    fn brute_force(conf: &[f64], correct: &[bool]) -> Vec<f64> {
        let mut distinct: Vec<f64> = conf.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let u = distinct.len();
        let group_of = |c: f64| distinct.iter().position(|&d| d == c).unwrap();
        let mut best = (f64::INFINITY, vec![]);
        for cuts in 0u32..(1 << (u - 1)) {
            let mut block = vec![0usize; u];
            for g in 1..u {
                block[g] = block[g - 1] + ((cuts >> (g - 1)) & 1) as usize;
            }
            let nb = block[u - 1] + 1;
            let mut sum = vec![0.0; nb];
            let mut cnt = vec![0.0; nb];
            for (&c, &y) in conf.iter().zip(correct) {
                let b = block[group_of(c)];
                sum[b] += y as u8 as f64;
                cnt[b] += 1.0;
            }
            let means: Vec<f64> = (0..nb).map(|b| sum[b] / cnt[b]).collect();
            if means.windows(2).any(|w| w[0] > w[1]) {
                continue;
            }
            let fitted: Vec<f64> = conf.iter().map(|&c| means[block[group_of(c)]]).collect();
            let sse: f64 = fitted
                .iter()
                .zip(correct)
                .map(|(f, &y)| (f - y as u8 as f64).powi(2))
                .sum();
            if sse < best.0 - 1e-12 {
                best = (sse, fitted);
            }
        }
        best.1
    }

    proptest! {
        #[test]
        fn matches_exhaustive_pooling(
            data in prop::collection::vec((0u8..12, any::<bool>()), 1..=10)
        ) {
            let conf: Vec<f64> = data.iter().map(|(c, _)| *c as f64 / 11.0).collect();
            let correct: Vec<bool> = data.iter().map(|(_, y)| *y).collect();
            let m = fit_isotonic(&conf, &correct).unwrap();
            let expect = brute_force(&conf, &correct);
            for (c, e) in conf.iter().zip(&expect) {
                prop_assert!((m.calibrate(*c) - e).abs() < 1e-12);
            }
        }

        #[test]
        fn output_is_monotone(
            data in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..60),
            probes in prop::collection::vec(0.0f64..=1.0, 2..20)
        ) {
            let conf: Vec<f64> = data.iter().map(|d| d.0).collect();
            let correct: Vec<bool> = data.iter().map(|d| d.1).collect();
            let m = fit_isotonic(&conf, &correct).unwrap();
            let mut probes = probes;
            probes.sort_by(f64::total_cmp);
            for w in probes.windows(2) {
                prop_assert!(m.calibrate(w[0]) <= m.calibrate(w[1]));
            }
        }
    }
}
