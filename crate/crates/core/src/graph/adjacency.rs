use crate::graph::Graph;
use crate::sparse::CsrMatrix;

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` in compressed-row form. Its sparsity pattern
/// is exactly the self-loop-augmented neighborhood `N(i) ∪ {i}`, which GAT
/// reuses as its attention structure.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(CsrMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.0
    }

    pub fn num_nodes(&self) -> usize {
        self.0.rows()
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let deg_hat: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut triplets = Vec::with_capacity(2 * g.num_edges() + n);
    for (i, d) in deg_hat.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(u, v) in g.edges() {
        let w = 1.0 / (deg_hat[u] * deg_hat[v]).sqrt();
        triplets.push((u, v, w));
        triplets.push((v, u, w));
    }
    NormalizedAdjacency(CsrMatrix::from_triplets(n, n, triplets).expect("indices in range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{synthetic_sbm, SbmConfig, Splits};
    use crate::nn::DenseMatrix;

    fn graph(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        Graph::new(
            n,
            edges,
            DenseMatrix::zeros(n, 1),
            vec![0; n],
            1,
            Splits::default(),
        )
        .unwrap()
    }

    /// Dense `D̂^{-1/2}(A+I)D̂^{-1/2}` built straight from the definition.
    fn dense_oracle(g: &Graph) -> DenseMatrix {
        let n = g.num_nodes();
        let mut a = DenseMatrix::identity(n);
        for &(u, v) in g.edges() {
            a.set(u, v, 1.0);
            a.set(v, u, 1.0);
        }
        let d: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, a.get(i, j) / (d[i].sqrt() * d[j].sqrt()));
            }
        }
        out
    }

    #[test]
    fn two_node_edge_gives_one_half_everywhere() {
        let adj = normalize_adjacency(&graph(2, vec![(0, 1)]));
        assert_eq!(adj.matrix().to_dense(), DenseMatrix::filled(2, 2, 0.5));
    }

    #[test]
    fn single_node_has_unit_self_loop() {
        let adj = normalize_adjacency(&graph(1, vec![]));
        assert_eq!(adj.matrix().to_dense(), DenseMatrix::filled(1, 1, 1.0));
    }

    #[test]
    fn matches_dense_oracle_on_random_graphs() {
        for seed in 0..20 {
            let g = synthetic_sbm(&SbmConfig {
                blocks: 2,
                nodes_per_block: 10,
                p_in: 0.3,
                p_out: 0.1,
                num_features: 2,
                seed,
            })
            .unwrap();
            let adj = normalize_adjacency(&g).matrix().to_dense();
            assert!(adj.max_abs_diff(&dense_oracle(&g)) < 1e-12);
            assert!(adj.max_abs_diff(&adj.transpose()) == 0.0);
        }
    }
}
