use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Splits};
use crate::nn::DenseMatrix;
use crate::rng;

/// Stochastic block model with one class per block.
///
/// Features are a class indicator (column `class % num_features`) plus
/// isotropic Gaussian noise. Each block contributes roughly 10% of its
/// nodes to the training split, 20% to validation and the rest to test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub blocks: usize,
    pub nodes_per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub num_features: usize,
    pub seed: u64,
}

/// Noise standard deviation added to every feature entry.
pub const SBM_FEATURE_NOISE: f64 = 1.0;

pub fn synthetic_sbm(cfg: &SbmConfig) -> Result<Graph> {
    for (name, p) in [("p_in", cfg.p_in), ("p_out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "{name} must be in [0, 1], got {p}"
            )));
        }
    }
    if cfg.blocks == 0 || cfg.nodes_per_block == 0 || cfg.num_features == 0 {
        return Err(Error::InvalidArgument(
            "blocks, nodes_per_block and num_features must be >= 1".into(),
        ));
    }
    let n = cfg.blocks * cfg.nodes_per_block;
    let labels: Vec<usize> = (0..n).map(|i| i / cfg.nodes_per_block).collect();

    let mut er = rng::stream(cfg.seed, "sbm-edges");
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if er.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut fr = rng::stream(cfg.seed, "sbm-features");
    let noise = Normal::new(0.0, SBM_FEATURE_NOISE).expect("positive std");
    let mut features = DenseMatrix::zeros(n, cfg.num_features);
    for i in 0..n {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = noise.sample(&mut fr);
        }
        row[labels[i] % cfg.num_features] += 1.0;
    }

    let mut sr = rng::stream(cfg.seed, "sbm-splits");
    let mut splits = Splits::default();
    let npb = cfg.nodes_per_block;
    let n_train = ((npb as f64 * 0.1).round() as usize).max(1);
    let n_val = if npb >= 3 {
        ((npb as f64 * 0.2).round() as usize).max(1)
    } else {
        0
    };
    for b in 0..cfg.blocks {
        let mut members: Vec<usize> = (b * npb..(b + 1) * npb).collect();
        members.shuffle(&mut sr);
        let n_train = n_train.min(npb);
        let n_val = n_val.min(npb - n_train);
        splits.train.extend_from_slice(&members[..n_train]);
        splits.val.extend_from_slice(&members[n_train..n_train + n_val]);
        splits.test.extend_from_slice(&members[n_train + n_val..]);
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    Graph::new(n, edges, features, labels, cfg.blocks, splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::true_same_class_ratio;

    fn cfg(blocks: usize, npb: usize, p_in: f64, p_out: f64, seed: u64) -> SbmConfig {
        SbmConfig {
            blocks,
            nodes_per_block: npb,
            p_in,
            p_out,
            num_features: 3,
            seed,
        }
    }

    #[test]
    fn two_disjoint_triangles() {
        let g = synthetic_sbm(&cfg(2, 3, 1.0, 0.0, 0)).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]);
        assert!((0..6).all(|i| true_same_class_ratio(&g, i) == Some(1.0)));
        assert_eq!(g.splits().train.len(), 2);
        assert_eq!(g.splits().val.len(), 2);
        assert_eq!(g.splits().test.len(), 2);
    }

    #[test]
    fn zero_probabilities_give_no_edges() {
        assert_eq!(synthetic_sbm(&cfg(3, 4, 0.0, 0.0, 1)).unwrap().num_edges(), 0);
    }

    #[test]
    fn invalid_probabilities_rejected() {
        assert!(synthetic_sbm(&cfg(2, 3, 1.2, 0.0, 0)).is_err());
        assert!(synthetic_sbm(&cfg(2, 3, 0.5, -0.1, 0)).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            synthetic_sbm(&cfg(2, 8, 0.5, 0.1, 4)).unwrap(),
            synthetic_sbm(&cfg(2, 8, 0.5, 0.1, 4)).unwrap()
        );
    }

    #[test]
    fn edge_count_matches_binomial_expectation() {
        // E|E| = 0.5 * C(20, 2) = 95
        let total: usize = (0..1000)
            .map(|s| synthetic_sbm(&cfg(1, 20, 0.5, 0.0, s)).unwrap().num_edges())
            .sum();
        let mean = total as f64 / 1000.0;
        assert!((mean - 95.0).abs() <= 0.05 * 95.0, "{mean}");
    }
}
