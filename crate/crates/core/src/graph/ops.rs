use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Keeps `round((1 - fraction) · |E|)` edges chosen uniformly at random.
/// Nodes, features, labels and splits are untouched.
pub fn drop_edges(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "edge drop fraction must be in [0, 1], got {fraction}"
        )));
    }
    let total = g.num_edges();
    let keep = ((1.0 - fraction) * total as f64).round() as usize;
    let mut r = rng::stream(seed, "drop-edges");
    let mut idx = sample(&mut r, total, keep.min(total)).into_vec();
    idx.sort_unstable();
    let kept = idx.into_iter().map(|i| g.edges()[i]).collect();
    g.with_edges(kept)
}

/// Edges over the maximum possible number of undirected edges.
pub fn graph_density(g: &Graph) -> Result<f64> {
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "graph density needs at least 2 nodes, got {n}"
        )));
    }
    let max_edges = n as f64 * (n as f64 - 1.0) / 2.0;
    Ok(g.num_edges() as f64 / max_edges)
}

/// Share of `node`'s neighbors carrying its label; `None` for isolated nodes.
pub fn true_same_class_ratio(g: &Graph, node: usize) -> Option<f64> {
    let nb = g.neighbors(node);
    if nb.is_empty() {
        return None;
    }
    let y = g.labels()[node];
    let same = nb.iter().filter(|&&j| g.labels()[j] == y).count();
    Some(same as f64 / nb.len() as f64)
}
