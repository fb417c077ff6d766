//! Turning a top-confidence map back into full class distributions.

use crate::nn::{argmax, DenseMatrix};

/// Replaces each row's top probability `p̂` by `map(p̂)` and spreads the
/// remaining mass over the other classes in proportion to their original
/// probabilities, or uniformly when those were all zero.
pub fn apply_binary_calibrator_to_rows(probabilities: &DenseMatrix, map: impl Fn(f64) -> f64) -> DenseMatrix {
    let mut out = probabilities.clone();
    let k_total = out.cols();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let k = argmax(row);
        if k_total == 1 {
            row[0] = 1.0;
            continue;
        }
        let top = map(row[k]).clamp(0.0, 1.0);
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, v)| v)
            .sum();
        for (j, v) in row.iter_mut().enumerate() {
            if j == k {
                *v = top;
            } else if rest > 0.0 {
                *v *= (1.0 - top) / rest;
            } else {
                *v = (1.0 - top) / (k_total - 1) as f64;
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let p = DenseMatrix::from_rows(&[[0.6, 0.3, 0.1]]);
        assert!(apply_binary_calibrator_to_rows(&p, |x| x).max_abs_diff(&p) < 1e-15);
        let lifted = apply_binary_calibrator_to_rows(&p, |_| 0.8);
        assert!(lifted.max_abs_diff(&DenseMatrix::from_rows(&[[0.8, 0.15, 0.05]])) < 1e-15);
        let onehot = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0]]);
        let lifted = apply_binary_calibrator_to_rows(&onehot, |_| 0.7);
        assert!(lifted.max_abs_diff(&DenseMatrix::from_rows(&[[0.15, 0.7, 0.15]])) < 1e-15);
    }

    proptest! {
        #[test]
        fn rows_stay_normalized_and_argmax_survives(
            raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..20),
            boost in 0.0f64..1.0
        ) {
            let rows: Vec<Vec<f64>> = raw.into_iter().map(|r| {
                let s: f64 = r.iter().sum::<f64>() + 1e-3;
                r.iter().map(|v| (v + 2.5e-4) / s).collect()
            }).collect();
            let p = DenseMatrix::from_rows(&rows);
            // maps with map(p) >= p keep the top class on top
            let lifted = apply_binary_calibrator_to_rows(&p, |x| x + boost * (1.0 - x));
            for i in 0..p.rows() {
                prop_assert!((lifted.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert_eq!(argmax(lifted.row(i)), argmax(p.row(i)));
            }
        }
    }
}
