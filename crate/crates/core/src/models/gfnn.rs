//! SGC features followed by a two-layer perceptron:
//! `relu(Ã^k X W₁ + b₁) W₂ + b₂`.

use super::sgc::propagated;
use super::{affine, apply_mask, relu_backward, GraphContext, Mode};
use crate::error::Result;
use crate::nn::{glorot_init, DenseMatrix, ParameterSet};
use crate::rng::Rng;

pub struct Tape {
    input: DenseMatrix,
    pre: DenseMatrix,
    hidden: DenseMatrix,
    hidden_mask: Option<DenseMatrix>,
}

pub(super) fn init(
    spec: &super::ModelSpec,
    num_features: usize,
    num_classes: usize,
    rng: &mut Rng,
) -> Result<ParameterSet> {
    let mut p = ParameterSet::new();
    p.insert("W0", glorot_init(num_features, spec.width, rng))?;
    p.insert("b0", DenseMatrix::zeros(1, spec.width))?;
    p.insert("W1", glorot_init(spec.width, num_classes, rng))?;
    p.insert("b1", DenseMatrix::zeros(1, num_classes))?;
    Ok(p)
}

pub(super) fn forward(
    params: &ParameterSet,
    ctx: &GraphContext,
    mode: &mut Mode<'_>,
) -> Result<(DenseMatrix, Tape)> {
    let (input, _) = mode.dense_dropout(propagated(ctx)?);
    let pre = affine(&input, params.require("W0")?, params.require("b0")?)?;
    let (hidden, hidden_mask) = mode.dense_dropout(&pre.relu());
    let logits = affine(&hidden, params.require("W1")?, params.require("b1")?)?;
    Ok((
        logits,
        Tape {
            input,
            pre,
            hidden,
            hidden_mask,
        },
    ))
}

pub(super) fn backward(
    params: &ParameterSet,
    _ctx: &GraphContext,
    tape: &Tape,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    let mut grads = params.zeros_like();
    grads.accumulate("W1", &tape.hidden.t_matmul(dlogits)?)?;
    grads.accumulate("b1", &dlogits.column_sums())?;
    let mut dh = dlogits.matmul_t(params.require("W1")?)?;
    apply_mask(&mut dh, &tape.hidden_mask)?;
    relu_backward(&mut dh, &tape.pre);
    grads.accumulate("W0", &tape.input.t_matmul(&dh)?)?;
    grads.accumulate("b0", &dh.column_sums())?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::super::testing::small_graph;
    use super::super::{FittedModel, ModelKind, ModelSpec};
    use super::*;
    use crate::graph::normalize_adjacency;

    #[test]
    fn identity_first_layer_reduces_to_sgc_then_linear() {
        let g = small_graph(6, 3, 2, 5);
        let g = g.with_row_normalized_features();
        // nonnegative features survive ReLU untouched
        let abs = g.features().map(f64::abs);
        let g = crate::graph::Graph::new(
            6,
            g.edges().to_vec(),
            abs,
            g.labels().to_vec(),
            2,
            g.splits().clone(),
        )
        .unwrap();
        let spec = ModelSpec {
            width: 3,
            ..ModelSpec::default_for(ModelKind::Gfnn)
        };
        let mut m = FittedModel::init(spec, 3, 2, 0).unwrap();
        *m.params.get_mut("W0").unwrap() = DenseMatrix::identity(3);
        let out = m.predict_graph(&g).unwrap();
        let a = normalize_adjacency(&g).matrix().to_dense();
        let sgc = a.matmul(&a).unwrap().matmul(g.features()).unwrap();
        let expect = sgc.matmul(m.params.get("W1").unwrap()).unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn matches_composed_dense_oracle() {
        let g = small_graph(5, 4, 3, 2);
        let m = FittedModel::init(
            ModelSpec {
                width: 6,
                ..ModelSpec::default_for(ModelKind::Gfnn)
            },
            4,
            3,
            1,
        )
        .unwrap();
        let out = m.predict_graph(&g).unwrap();
        let a = normalize_adjacency(&g).matrix().to_dense();
        let h = a
            .matmul(&a)
            .unwrap()
            .matmul(g.features())
            .unwrap()
            .matmul(m.params.get("W0").unwrap())
            .unwrap()
            .relu();
        let expect = h.matmul(m.params.get("W1").unwrap()).unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-10);
    }
}
