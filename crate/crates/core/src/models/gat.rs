//! Graph attention. Per head, `e_ij = LeakyReLU(a_srcᵀ Wh_i + a_dstᵀ Wh_j)`
//! is softmax-normalized over `N(i) ∪ {i}`; hidden layers concatenate their
//! heads and apply ReLU, the output layer averages its heads.

use rand::Rng as _;

use super::{apply_mask, relu_backward, GraphContext, Mode, ModelSpec};
use crate::error::Result;
use crate::nn::{glorot_init, softmax_in_place, DenseMatrix, InputMatrix, ParameterSet};
use crate::rng::Rng;
use crate::sparse::CsrMatrix;

pub const LEAKY_SLOPE: f64 = 0.2;
const OUTPUT_HEADS: usize = 1;

struct HeadTape {
    z: DenseMatrix,
    /// Pre-LeakyReLU scores, one per stored adjacency entry.
    scores: Vec<f64>,
    attention: Vec<f64>,
    /// Attention dropout multipliers, if any were sampled.
    mask: Option<Vec<f64>>,
}

enum LayerInput {
    Features(InputMatrix),
    Hidden(DenseMatrix, Option<DenseMatrix>),
}

impl LayerInput {
    fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(x) => x.matmul(w),
            LayerInput::Hidden(h, _) => h.matmul(w),
        }
    }

    fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(x) => x.t_matmul(g),
            LayerInput::Hidden(h, _) => h.t_matmul(g),
        }
    }
}

struct LayerTape {
    input: LayerInput,
    heads: Vec<HeadTape>,
    pre: DenseMatrix,
}

pub struct Tape {
    layers: Vec<LayerTape>,
}

fn layer_shape(spec: &ModelSpec, l: usize, num_features: usize, num_classes: usize) -> (usize, usize, usize) {
    let fin = if l == 0 {
        num_features
    } else {
        spec.heads * spec.width
    };
    if l + 1 == spec.depth {
        (fin, OUTPUT_HEADS, num_classes)
    } else {
        (fin, spec.heads, spec.width)
    }
}

pub(super) fn init(
    spec: &ModelSpec,
    num_features: usize,
    num_classes: usize,
    rng: &mut Rng,
) -> Result<ParameterSet> {
    let mut p = ParameterSet::new();
    for l in 0..spec.depth {
        let (fin, heads, fout) = layer_shape(spec, l, num_features, num_classes);
        for h in 0..heads {
            p.insert(format!("W{l}_{h}"), glorot_init(fin, fout, rng))?;
            p.insert(format!("a_src{l}_{h}"), glorot_init(fout, 1, rng))?;
            p.insert(format!("a_dst{l}_{h}"), glorot_init(fout, 1, rng))?;
        }
        let out = if l + 1 == spec.depth { fout } else { heads * fout };
        p.insert(format!("b{l}"), DenseMatrix::zeros(1, out))?;
    }
    Ok(p)
}

fn attention_mask(mode: &mut Mode<'_>, len: usize) -> Option<Vec<f64>> {
    match mode {
        Mode::Train { dropout, rng } if *dropout > 0.0 => {
            let keep = 1.0 / (1.0 - *dropout);
            Some(
                (0..len)
                    .map(|_| if rng.random::<f64>() < *dropout { 0.0 } else { keep })
                    .collect(),
            )
        }
        _ => None,
    }
}

fn head_forward(
    adj: &CsrMatrix,
    z: DenseMatrix,
    a_src: &DenseMatrix,
    a_dst: &DenseMatrix,
    mode: &mut Mode<'_>,
) -> Result<(DenseMatrix, HeadTape)> {
    let s = z.matmul(a_src)?;
    let t = z.matmul(a_dst)?;
    let mut scores = Vec::with_capacity(adj.nnz());
    let mut attention = Vec::with_capacity(adj.nnz());
    for i in 0..adj.rows() {
        let (cols, _) = adj.row(i);
        let start = attention.len();
        for &j in cols {
            let u = s.get(i, 0) + t.get(j, 0);
            scores.push(u);
            attention.push(if u > 0.0 { u } else { LEAKY_SLOPE * u });
        }
        softmax_in_place(&mut attention[start..]);
    }
    let mask = attention_mask(mode, attention.len());
    let weights = match &mask {
        Some(m) => attention.iter().zip(m).map(|(a, m)| a * m).collect(),
        None => attention.clone(),
    };
    let out = adj.with_values(weights).spmm(&z)?;
    Ok((
        out,
        HeadTape {
            z,
            scores,
            attention,
            mask,
        },
    ))
}

pub(super) fn forward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    mode: &mut Mode<'_>,
) -> Result<(DenseMatrix, Tape)> {
    let adj = &ctx.adjacency;
    let n = adj.rows();
    let mut layers = Vec::with_capacity(spec.depth);
    let mut h = DenseMatrix::zeros(0, 0);
    for l in 0..spec.depth {
        let last = l + 1 == spec.depth;
        let input = if l == 0 {
            LayerInput::Features(mode.input_dropout(&ctx.features))
        } else {
            let (dropped, mask) = mode.dense_dropout(&h);
            LayerInput::Hidden(dropped, mask)
        };
        let b = params.require(&format!("b{l}"))?;
        let heads = if last { OUTPUT_HEADS } else { spec.heads };
        let mut pre = DenseMatrix::zeros(n, b.cols());
        let mut head_tapes = Vec::with_capacity(heads);
        for hd in 0..heads {
            let z = input.matmul(params.require(&format!("W{l}_{hd}"))?)?;
            let (out, tape) = head_forward(
                adj,
                z,
                params.require(&format!("a_src{l}_{hd}"))?,
                params.require(&format!("a_dst{l}_{hd}"))?,
                mode,
            )?;
            if last {
                pre.axpy(1.0 / heads as f64, &out)?;
            } else {
                pre.set_columns(hd * out.cols(), &out);
            }
            head_tapes.push(tape);
        }
        pre.add_row_broadcast(b)?;
        h = if last { pre.clone() } else { pre.relu() };
        layers.push(LayerTape {
            input,
            heads: head_tapes,
            pre,
        });
    }
    Ok((h, Tape { layers }))
}

fn head_backward(
    adj: &CsrMatrix,
    tape: &HeadTape,
    a_src: &DenseMatrix,
    a_dst: &DenseMatrix,
    dout: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let n = adj.rows();
    let z = &tape.z;
    let weights: Vec<f64> = match &tape.mask {
        Some(m) => tape.attention.iter().zip(m).map(|(a, m)| a * m).collect(),
        None => tape.attention.clone(),
    };
    let mut dz = adj.with_values(weights).t_spmm(dout)?;
    let mut ds = DenseMatrix::zeros(n, 1);
    let mut dt = DenseMatrix::zeros(n, 1);
    let indptr = adj.indptr();
    let mut dalpha = Vec::new();
    for i in 0..n {
        let (cols, _) = adj.row(i);
        let range = indptr[i]..indptr[i + 1];
        let att = &tape.attention[range.clone()];
        dalpha.clear();
        for (e, &j) in range.clone().zip(cols) {
            let dot: f64 = dout.row(i).iter().zip(z.row(j)).map(|(a, b)| a * b).sum();
            let m = tape.mask.as_ref().map_or(1.0, |m| m[e]);
            dalpha.push(dot * m);
        }
        let inner: f64 = att.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        for (k, (e, &j)) in range.zip(cols).enumerate() {
            let de = att[k] * (dalpha[k] - inner);
            let du = if tape.scores[e] > 0.0 {
                de
            } else {
                LEAKY_SLOPE * de
            };
            ds.as_mut_slice()[i] += du;
            dt.as_mut_slice()[j] += du;
        }
    }
    let da_src = z.t_matmul(&ds)?;
    let da_dst = z.t_matmul(&dt)?;
    dz.add_assign(&ds.matmul_t(a_src)?)?;
    dz.add_assign(&dt.matmul_t(a_dst)?)?;
    Ok((dz, da_src, da_dst))
}

pub(super) fn backward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    tape: &Tape,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    let adj = &ctx.adjacency;
    let mut grads = params.zeros_like();
    let mut dpre = dlogits.clone();
    for l in (0..spec.depth).rev() {
        let layer = &tape.layers[l];
        let last = l + 1 == spec.depth;
        if !last {
            relu_backward(&mut dpre, &layer.pre);
        }
        grads.accumulate(&format!("b{l}"), &dpre.column_sums())?;
        let heads = layer.heads.len();
        let mut dinput: Option<DenseMatrix> = None;
        for (hd, ht) in layer.heads.iter().enumerate() {
            let width = ht.z.cols();
            let dout = if last {
                dpre.scaled(1.0 / heads as f64)
            } else {
                dpre.columns(hd * width, width)
            };
            let a_src = params.require(&format!("a_src{l}_{hd}"))?;
            let a_dst = params.require(&format!("a_dst{l}_{hd}"))?;
            let (dz, da_src, da_dst) = head_backward(adj, ht, a_src, a_dst, &dout)?;
            grads.accumulate(&format!("a_src{l}_{hd}"), &da_src)?;
            grads.accumulate(&format!("a_dst{l}_{hd}"), &da_dst)?;
            grads.accumulate(&format!("W{l}_{hd}"), &layer.input.t_matmul(&dz)?)?;
            if l > 0 {
                let d = dz.matmul_t(params.require(&format!("W{l}_{hd}"))?)?;
                match &mut dinput {
                    Some(acc) => acc.add_assign(&d)?,
                    None => dinput = Some(d),
                }
            }
        }
        if let (Some(mut d), LayerInput::Hidden(_, mask)) = (dinput, &layer.input) {
            apply_mask(&mut d, mask)?;
            dpre = d;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph, Splits};

    fn star(n: usize) -> CsrMatrix {
        let g = Graph::new(
            n,
            (1..n).map(|j| (0, j)),
            DenseMatrix::zeros(n, 1),
            vec![0; n],
            1,
            Splits::default(),
        )
        .unwrap();
        normalize_adjacency(&g).into_matrix()
    }

    #[test]
    fn equal_embeddings_give_uniform_attention() {
        let adj = star(5);
        let z = DenseMatrix::filled(5, 3, 0.7);
        let a = DenseMatrix::from_rows(&[[0.3], [-1.0], [2.0]]);
        let (_, tape) = head_forward(&adj, z, &a, &a, &mut Mode::Eval).unwrap();
        let (cols, _) = adj.row(0);
        assert_eq!(cols.len(), 5);
        for &att in &tape.attention[..5] {
            assert!((att - 0.2).abs() < 1e-15);
        }
        for &att in &tape.attention[5..] {
            assert!((att - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn single_node_attends_to_itself() {
        let adj = star(1);
        let z = DenseMatrix::from_rows(&[[1.5, -2.0]]);
        let a = DenseMatrix::from_rows(&[[1.0], [1.0]]);
        let (out, tape) = head_forward(&adj, z.clone(), &a, &a, &mut Mode::Eval).unwrap();
        assert_eq!(tape.attention, vec![1.0]);
        assert_eq!(out, z);
    }
}
