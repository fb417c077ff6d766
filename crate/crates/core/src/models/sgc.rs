//! Simplified graph convolution: `Ã^k X W + b`, with `Ã^k X` precomputed.

use super::{affine, GraphContext};
use crate::error::{Error, Result};
use crate::nn::{glorot_init, DenseMatrix, ParameterSet};
use crate::rng::Rng;

pub(super) fn init(num_features: usize, num_classes: usize, rng: &mut Rng) -> Result<ParameterSet> {
    let mut p = ParameterSet::new();
    p.insert("W0", glorot_init(num_features, num_classes, rng))?;
    p.insert("b0", DenseMatrix::zeros(1, num_classes))?;
    Ok(p)
}

pub(super) fn propagated(ctx: &GraphContext) -> Result<&DenseMatrix> {
    ctx.propagated
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("graph context lacks propagated features".into()))
}

pub(super) fn forward(params: &ParameterSet, ctx: &GraphContext) -> Result<DenseMatrix> {
    affine(propagated(ctx)?, params.require("W0")?, params.require("b0")?)
}

pub(super) fn backward(
    params: &ParameterSet,
    ctx: &GraphContext,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    let mut grads = params.zeros_like();
    grads.accumulate("W0", &propagated(ctx)?.t_matmul(dlogits)?)?;
    grads.accumulate("b0", &dlogits.column_sums())?;
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::super::testing::small_graph;
    use super::super::{FittedModel, ModelKind, ModelSpec};
    use crate::graph::normalize_adjacency;

    #[test]
    fn depth_zero_is_linear_in_features() {
        let g = small_graph(5, 3, 2, 1);
        let spec = ModelSpec {
            depth: 0,
            ..ModelSpec::default_for(ModelKind::Sgc)
        };
        let m = FittedModel::init(spec, 3, 2, 0).unwrap();
        let out = m.predict_graph(&g).unwrap();
        let expect = g.features().matmul(m.params.get("W0").unwrap()).unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn matches_dense_power_oracle() {
        let g = small_graph(5, 4, 3, 8);
        let m = FittedModel::init(ModelSpec::default_for(ModelKind::Sgc), 4, 3, 3).unwrap();
        let out = m.predict_graph(&g).unwrap();
        let a = normalize_adjacency(&g).matrix().to_dense();
        let expect = a
            .matmul(&a)
            .unwrap()
            .matmul(g.features())
            .unwrap()
            .matmul(m.params.get("W0").unwrap())
            .unwrap();
        assert!(out.logits.max_abs_diff(&expect) < 1e-10);
    }
}
