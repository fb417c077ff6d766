//! Personalized-PageRank propagation of a two-layer perceptron's output:
//! `H ← (1 − α) Ã H + α H⁰` repeated `depth` times from `H⁰ = f(X)`.

use super::{affine, apply_mask, relu_backward, GraphContext, Mode, ModelSpec};
use crate::error::Result;
use crate::nn::{glorot_init, DenseMatrix, InputMatrix, ParameterSet};
use crate::rng::Rng;

pub struct Tape {
    input: InputMatrix,
    pre: DenseMatrix,
    hidden: DenseMatrix,
    hidden_mask: Option<DenseMatrix>,
}

pub(super) fn init(
    spec: &ModelSpec,
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

/// `depth` propagation steps starting from `h0`.
pub(crate) fn propagate(
    adj: &crate::sparse::CsrMatrix,
    h0: &DenseMatrix,
    alpha: f64,
    depth: usize,
) -> Result<DenseMatrix> {
    let mut h = h0.clone();
    for _ in 0..depth {
        let mut next = adj.spmm(&h)?;
        next.scale(1.0 - alpha);
        next.axpy(alpha, h0)?;
        h = next;
    }
    Ok(h)
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    mode: &mut Mode<'_>,
) -> Result<(DenseMatrix, Tape)> {
    let input = mode.input_dropout(&ctx.features);
    let mut pre = input.matmul(params.require("W0")?)?;
    pre.add_row_broadcast(params.require("b0")?)?;
    let (hidden, hidden_mask) = mode.dense_dropout(&pre.relu());
    let h0 = affine(&hidden, params.require("W1")?, params.require("b1")?)?;
    let logits = propagate(&ctx.adjacency, &h0, spec.appnp_alpha, spec.depth)?;
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
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    tape: &Tape,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    let alpha = spec.appnp_alpha;
    let mut g = dlogits.clone();
    let mut acc = DenseMatrix::zeros(g.rows(), g.cols());
    for _ in 0..spec.depth {
        acc.axpy(alpha, &g)?;
        g = ctx.adjacency.spmm(&g)?;
        g.scale(1.0 - alpha);
    }
    g.add_assign(&acc)?;
    let mut grads = params.zeros_like();
    grads.accumulate("W1", &tape.hidden.t_matmul(&g)?)?;
    grads.accumulate("b1", &g.column_sums())?;
    let mut dh = g.matmul_t(params.require("W1")?)?;
    apply_mask(&mut dh, &tape.hidden_mask)?;
    relu_backward(&mut dh, &tape.pre);
    grads.accumulate("W0", &tape.input.t_matmul(&dh)?)?;
    grads.accumulate("b0", &dh.column_sums())?;
    Ok(grads)
}
