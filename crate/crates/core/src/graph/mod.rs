//! Attributed undirected graphs for transductive node classification.

mod adjacency;
mod bundle;
mod ops;
mod synthetic;

pub use adjacency::{normalize_adjacency, NormalizedAdjacency};
pub use bundle::{load_graph_bundle, write_graph_bundle, BundleMeta};
pub use ops::{drop_edges, graph_density, true_same_class_ratio};
pub use synthetic::{synthetic_sbm, SbmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

/// Disjoint train/validation/test node sets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut owner = vec![None::<&str>; num_nodes];
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in set {
                if i >= num_nodes {
                    return Err(Error::InvalidGraph(format!(
                        "{name} split index {i} >= num_nodes {num_nodes}"
                    )));
                }
                if let Some(prev) = owner[i] {
                    return Err(Error::InvalidGraph(format!(
                        "node {i} appears in both {prev} and {name} splits"
                    )));
                }
                owner[i] = Some(name);
            }
        }
        Ok(())
    }
}

/// Undirected attributed graph with labels and splits.
///
/// Edges are stored once as `(min, max)` pairs in sorted order; neighbor
/// lists are materialized symmetrically.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: DenseMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    splits: Splits,
}

impl Graph {
    /// Validates and normalizes the inputs. Edges may be given in either
    /// orientation and repeated; self-loops are an error.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: DenseMatrix,
        labels: Vec<usize>,
        num_classes: usize,
        splits: Splits,
    ) -> Result<Self> {
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has an endpoint >= num_nodes {num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on node {u}")));
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        canon.dedup();
        if features.rows() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows, expected {num_nodes}",
                features.rows()
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {num_nodes} nodes",
                labels.len()
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::InvalidGraph(format!(
                "label {y} of node {i} >= num_classes {num_classes}"
            )));
        }
        splits.validate(num_nodes)?;
        let neighbors = neighbor_lists(num_nodes, &canon);
        Ok(Self {
            num_nodes,
            edges: canon,
            neighbors,
            features,
            labels,
            num_classes,
            splits,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor ids of `node`.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    /// Copy with a different edge set; everything else is shared.
    pub fn with_edges(&self, edges: Vec<(usize, usize)>) -> Result<Self> {
        Graph::new(
            self.num_nodes,
            edges,
            self.features.clone(),
            self.labels.clone(),
            self.num_classes,
            self.splits.clone(),
        )
    }

    pub fn with_splits(&self, splits: Splits) -> Result<Self> {
        splits.validate(self.num_nodes)?;
        Ok(Self {
            splits,
            ..self.clone()
        })
    }

    /// Scales every feature row to sum to one. Rows summing to zero are left
    /// alone.
    pub fn with_row_normalized_features(&self) -> Self {
        let mut features = self.features.clone();
        for i in 0..features.rows() {
            let row = features.row_mut(i);
            let s: f64 = row.iter().sum();
            if s != 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Self {
            features,
            ..self.clone()
        }
    }

    /// Applies a node relabeling: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::dims("Graph::permuted", self.num_nodes, perm.len()));
        }
        let mut features = DenseMatrix::zeros(self.num_nodes, self.features.cols());
        let mut labels = vec![0; self.num_nodes];
        for (i, &p) in perm.iter().enumerate() {
            features.row_mut(p).copy_from_slice(self.features.row(i));
            labels[p] = self.labels[i];
        }
        let map = |v: &Vec<usize>| v.iter().map(|&i| perm[i]).collect::<Vec<_>>();
        Graph::new(
            self.num_nodes,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            features,
            labels,
            self.num_classes,
            Splits {
                train: map(&self.splits.train),
                val: map(&self.splits.val),
                test: map(&self.splits.test),
            },
        )
    }
}

fn neighbor_lists(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut nb = vec![Vec::new(); n];
    for &(u, v) in edges {
        nb[u].push(v);
        nb[v].push(u);
    }
    for list in &mut nb {
        list.sort_unstable();
    }
    nb
}
