//! Graph convolution: `H ← σ(Ã · dropout(H) · W + b)` per layer, with no
//! activation after the last.

use super::{apply_mask, relu_backward, GraphContext, Mode, ModelSpec};
use crate::error::Result;
use crate::nn::{glorot_init, DenseMatrix, InputMatrix, ParameterSet};
use crate::rng::Rng;

pub struct Tape {
    input: InputMatrix,
    /// Dropped-out input and dropout mask of layers `1..depth`.
    hidden: Vec<(DenseMatrix, Option<DenseMatrix>)>,
    /// Pre-activations of every layer.
    pre: Vec<DenseMatrix>,
}

pub(super) fn init(
    spec: &ModelSpec,
    num_features: usize,
    num_classes: usize,
    rng: &mut Rng,
) -> Result<ParameterSet> {
    let mut dims = vec![num_features];
    dims.extend(std::iter::repeat_n(spec.width, spec.depth - 1));
    dims.push(num_classes);
    let mut p = ParameterSet::new();
    for l in 0..spec.depth {
        p.insert(format!("W{l}"), glorot_init(dims[l], dims[l + 1], rng))?;
        p.insert(format!("b{l}"), DenseMatrix::zeros(1, dims[l + 1]))?;
    }
    Ok(p)
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    mode: &mut Mode<'_>,
) -> Result<(DenseMatrix, Tape)> {
    let input = mode.input_dropout(&ctx.features);
    let mut hidden = Vec::new();
    let mut pre = Vec::new();
    let mut h = DenseMatrix::zeros(0, 0);
    for l in 0..spec.depth {
        let w = params.require(&format!("W{l}"))?;
        let xw = if l == 0 {
            input.matmul(w)?
        } else {
            let (dropped, mask) = mode.dense_dropout(&h);
            let xw = dropped.matmul(w)?;
            hidden.push((dropped, mask));
            xw
        };
        let mut p = ctx.adjacency.spmm(&xw)?;
        p.add_row_broadcast(params.require(&format!("b{l}"))?)?;
        h = if l + 1 < spec.depth { p.relu() } else { p.clone() };
        pre.push(p);
    }
    Ok((h, Tape { input, hidden, pre }))
}

pub(super) fn backward(
    params: &ParameterSet,
    ctx: &GraphContext,
    tape: &Tape,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    let depth = tape.pre.len();
    let mut grads = params.zeros_like();
    let mut dp = dlogits.clone();
    for l in (0..depth).rev() {
        if l + 1 < depth {
            relu_backward(&mut dp, &tape.pre[l]);
        }
        grads.accumulate(&format!("b{l}"), &dp.column_sums())?;
        // Ã is symmetric
        let dxw = ctx.adjacency.spmm(&dp)?;
        let w = params.require(&format!("W{l}"))?;
        if l == 0 {
            grads.accumulate("W0", &tape.input.t_matmul(&dxw)?)?;
        } else {
            let (dropped, mask) = &tape.hidden[l - 1];
            grads.accumulate(&format!("W{l}"), &dropped.t_matmul(&dxw)?)?;
            dp = dxw.matmul_t(w)?;
            apply_mask(&mut dp, mask)?;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::super::testing::small_graph;
    use super::super::{FittedModel, ModelKind};
    use super::*;
    use crate::graph::{Graph, Splits};

    #[test]
    fn single_layer_is_propagated_linear_map() {
        let g = Graph::new(
            2,
            [(0, 1)],
            DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, -1.0]]),
            vec![0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        let spec = ModelSpec {
            depth: 1,
            ..ModelSpec::default_for(ModelKind::Gcn)
        };
        let mut model = FittedModel::init(spec, 2, 2, 0).unwrap();
        let w = DenseMatrix::from_rows(&[[1.0, 0.5], [-1.0, 2.0]]);
        *model.params.get_mut("W0").unwrap() = w.clone();
        let out = model.predict_graph(&g).unwrap();
        // Ã is 0.5 everywhere
        let xw = g.features().matmul(&w).unwrap();
        for i in 0..2 {
            for k in 0..2 {
                let expect = 0.5 * (xw.get(0, k) + xw.get(1, k));
                assert!((out.logits.get(i, k) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeless_graph_is_node_local() {
        let g = small_graph(6, 3, 2, 4);
        let lonely = g.with_edges(vec![]).unwrap();
        let model = FittedModel::init(ModelSpec::default_for(ModelKind::Gcn), 3, 2, 1).unwrap();
        let full = model.predict_graph(&lonely).unwrap();
        for i in 0..6 {
            let single = Graph::new(
                1,
                [],
                g.features().select_rows(&[i]),
                vec![0],
                2,
                Splits::default(),
            )
            .unwrap();
            let out = model.predict_graph(&single).unwrap();
            for k in 0..2 {
                assert!((out.logits.get(0, k) - full.logits.get(i, k)).abs() < 1e-12);
            }
        }
    }
}
