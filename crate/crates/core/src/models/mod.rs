//! GCN, GAT, SGC, gfNN and APPNP with hand-written backward passes.
//!
//! Every architecture exposes the same pair of functions: a forward pass
//! that returns logits plus a tape of intermediates, and a backward pass
//! that turns a logit gradient into a parameter gradient.

mod appnp;
mod gat;
mod gcn;
mod gfnn;
mod io;
mod sgc;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, Graph};
use crate::nn::{argmax, softmax_rows, DenseMatrix, InputMatrix, ParameterSet};
use crate::rng::{self, Rng};
use crate::sparse::CsrMatrix;

pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use train::{
    default_train_config, train_model, tune_weight_decay, EpochRecord, TrainedModel, SGC_WEIGHT_DECAY_GRID,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Gat,
    Sgc,
    Gfnn,
    Appnp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Gcn,
        ModelKind::Gat,
        ModelKind::Sgc,
        ModelKind::Gfnn,
        ModelKind::Appnp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gat => "gat",
            ModelKind::Sgc => "sgc",
            ModelKind::Gfnn => "gfnn",
            ModelKind::Appnp => "appnp",
        }
    }

    fn code(self) -> u8 {
        match self {
            ModelKind::Gcn => 0,
            ModelKind::Gat => 1,
            ModelKind::Sgc => 2,
            ModelKind::Gfnn => 3,
            ModelKind::Appnp => 4,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture hyperparameters. `depth` is the layer count for GCN and GAT,
/// the propagation power for SGC and gfNN, and the number of power-iteration
/// steps for APPNP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub depth: usize,
    pub width: usize,
    /// Attention heads of the GAT hidden layers. The output layer uses one.
    #[serde(default = "one")]
    pub heads: usize,
    #[serde(default = "default_appnp_alpha")]
    pub appnp_alpha: f64,
}

fn one() -> usize {
    1
}

fn default_appnp_alpha() -> f64 {
    0.1
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        let (depth, width, heads) = match kind {
            ModelKind::Gcn => (2, 16, 1),
            ModelKind::Gat => (2, 8, 8),
            ModelKind::Sgc => (2, 1, 1),
            ModelKind::Gfnn => (2, 64, 1),
            ModelKind::Appnp => (10, 64, 1),
        };
        Self {
            kind,
            depth,
            width,
            heads,
            appnp_alpha: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let layered = matches!(self.kind, ModelKind::Gcn | ModelKind::Gat);
        if layered && self.depth == 0 {
            return Err(Error::Config(format!("{} needs depth >= 1", self.kind)));
        }
        if self.width == 0 {
            return Err(Error::Config("width must be >= 1".into()));
        }
        if self.kind == ModelKind::Gat && self.heads == 0 {
            return Err(Error::Config("GAT needs at least one head".into()));
        }
        if self.kind == ModelKind::Appnp && !(self.appnp_alpha > 0.0 && self.appnp_alpha <= 1.0) {
            return Err(Error::Config(format!(
                "appnp_alpha must be in (0, 1], got {}",
                self.appnp_alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub logits: DenseMatrix,
    pub probabilities: DenseMatrix,
}

impl ModelOutput {
    pub fn from_logits(logits: DenseMatrix) -> Self {
        let probabilities = softmax_rows(&logits);
        Self {
            logits,
            probabilities,
        }
    }
}

/// `(ŷ_i, p̂_i)` per node: the top class (lowest index on ties) and its
/// probability.
pub fn predict(out: &ModelOutput) -> Vec<(usize, f64)> {
    out.probabilities
        .row_iter()
        .map(|row| {
            let k = argmax(row);
            (k, row[k])
        })
        .collect()
}

/// Whether a forward pass samples dropout masks.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut Rng },
}

impl Mode<'_> {
    fn dense_dropout(&mut self, m: &DenseMatrix) -> (DenseMatrix, Option<DenseMatrix>) {
        match self {
            Mode::Train { dropout, rng } if *dropout > 0.0 => {
                let (out, mask) = crate::nn::dropout_forward(m, *dropout, rng, true);
                (out, Some(mask))
            }
            _ => (m.clone(), None),
        }
    }

    fn input_dropout(&mut self, x: &InputMatrix) -> InputMatrix {
        match self {
            Mode::Train { dropout, rng } if *dropout > 0.0 => x.dropout(*dropout, rng),
            _ => x.clone(),
        }
    }
}

/// Graph-derived inputs shared by every forward pass of one model on one
/// graph.
#[derive(Clone, Debug)]
pub struct GraphContext {
    /// `D̂^{-1/2}(A + I)D̂^{-1/2}`; its sparsity pattern is also the GAT
    /// attention structure.
    pub adjacency: CsrMatrix,
    pub features: InputMatrix,
    /// `Ã^k X` for SGC and gfNN.
    pub propagated: Option<DenseMatrix>,
}

impl GraphContext {
    pub fn new(g: &Graph, spec: &ModelSpec) -> Result<Self> {
        let adjacency = normalize_adjacency(g).into_matrix();
        let features = InputMatrix::from_dense_auto(g.features().clone());
        let propagated = match spec.kind {
            ModelKind::Sgc | ModelKind::Gfnn => {
                let mut p = g.features().clone();
                for _ in 0..spec.depth {
                    p = adjacency.spmm(&p)?;
                }
                Some(p)
            }
            _ => None,
        };
        Ok(Self {
            adjacency,
            features,
            propagated,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }
}

/// Intermediates recorded by a forward pass.
pub enum Tape {
    Gcn(gcn::Tape),
    Gat(gat::Tape),
    Sgc,
    Gfnn(gfnn::Tape),
    Appnp(appnp::Tape),
}

/// Glorot weights and zero biases in the layout each architecture expects.
pub fn init_params(
    spec: &ModelSpec,
    num_features: usize,
    num_classes: usize,
    rng: &mut Rng,
) -> Result<ParameterSet> {
    spec.validate()?;
    match spec.kind {
        ModelKind::Gcn => gcn::init(spec, num_features, num_classes, rng),
        ModelKind::Gat => gat::init(spec, num_features, num_classes, rng),
        ModelKind::Sgc => sgc::init(num_features, num_classes, rng),
        ModelKind::Gfnn => gfnn::init(spec, num_features, num_classes, rng),
        ModelKind::Appnp => appnp::init(spec, num_features, num_classes, rng),
    }
}

pub fn forward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    mode: &mut Mode<'_>,
) -> Result<(ModelOutput, Tape)> {
    let (logits, tape) = match spec.kind {
        ModelKind::Gcn => {
            let (z, t) = gcn::forward(spec, params, ctx, mode)?;
            (z, Tape::Gcn(t))
        }
        ModelKind::Gat => {
            let (z, t) = gat::forward(spec, params, ctx, mode)?;
            (z, Tape::Gat(t))
        }
        ModelKind::Sgc => (sgc::forward(params, ctx)?, Tape::Sgc),
        ModelKind::Gfnn => {
            let (z, t) = gfnn::forward(params, ctx, mode)?;
            (z, Tape::Gfnn(t))
        }
        ModelKind::Appnp => {
            let (z, t) = appnp::forward(spec, params, ctx, mode)?;
            (z, Tape::Appnp(t))
        }
    };
    Ok((ModelOutput::from_logits(logits), tape))
}

pub fn backward(
    spec: &ModelSpec,
    params: &ParameterSet,
    ctx: &GraphContext,
    tape: &Tape,
    dlogits: &DenseMatrix,
) -> Result<ParameterSet> {
    match (spec.kind, tape) {
        (ModelKind::Gcn, Tape::Gcn(t)) => gcn::backward(params, ctx, t, dlogits),
        (ModelKind::Gat, Tape::Gat(t)) => gat::backward(spec, params, ctx, t, dlogits),
        (ModelKind::Sgc, Tape::Sgc) => sgc::backward(params, ctx, dlogits),
        (ModelKind::Gfnn, Tape::Gfnn(t)) => gfnn::backward(params, ctx, t, dlogits),
        (ModelKind::Appnp, Tape::Appnp(t)) => appnp::backward(spec, params, ctx, t, dlogits),
        _ => Err(Error::InvalidArgument(format!(
            "tape does not belong to a {} forward pass",
            spec.kind
        ))),
    }
}

/// A trained model: immutable and safe to share between threads.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub num_features: usize,
    pub num_classes: usize,
    pub params: ParameterSet,
}

impl FittedModel {
    pub fn init(spec: ModelSpec, num_features: usize, num_classes: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, "init");
        let params = init_params(&spec, num_features, num_classes, &mut r)?;
        Ok(Self {
            spec,
            num_features,
            num_classes,
            params,
        })
    }

    /// Eval-mode output on `g`.
    pub fn predict_graph(&self, g: &Graph) -> Result<ModelOutput> {
        if g.num_features() != self.num_features || g.num_classes() != self.num_classes {
            return Err(Error::dims(
                "predict_graph",
                format!("{} features, {} classes", self.num_features, self.num_classes),
                format!("{} features, {} classes", g.num_features(), g.num_classes()),
            ));
        }
        let ctx = GraphContext::new(g, &self.spec)?;
        self.predict(&ctx)
    }

    pub fn predict(&self, ctx: &GraphContext) -> Result<ModelOutput> {
        Ok(forward(&self.spec, &self.params, ctx, &mut Mode::Eval)?.0)
    }
}

/// `x · W + b` with `b` broadcast over rows.
fn affine(x: &DenseMatrix, w: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = x.matmul(w)?;
    out.add_row_broadcast(b)?;
    Ok(out)
}

fn relu_backward(grad: &mut DenseMatrix, pre: &DenseMatrix) {
    for (g, &p) in grad.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

fn apply_mask(grad: &mut DenseMatrix, mask: &Option<DenseMatrix>) -> Result<()> {
    if let Some(m) = mask {
        grad.hadamard_assign(m)?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::graph::Splits;
    use crate::nn::{gradcheck, GradcheckOptions};

    /// A small connected-ish random graph with dense features.
    pub fn small_graph(n: usize, num_features: usize, num_classes: usize, seed: u64) -> Graph {
        use rand::Rng as _;
        let mut r = rng::stream(seed, "small-graph");
        let mut edges = Vec::new();
        for i in 1..n {
            edges.push((r.random_range(0..i), i));
        }
        for _ in 0..n / 2 {
            let u = r.random_range(0..n);
            let v = r.random_range(0..n);
            if u != v {
                edges.push((u, v));
            }
        }
        let features = crate::nn::glorot_init(n, num_features, &mut r).scaled(3.0);
        let labels = (0..n).map(|i| i % num_classes).collect();
        let splits = Splits {
            train: (0..n).collect(),
            val: vec![],
            test: vec![],
        };
        Graph::new(n, edges, features, labels, num_classes, splits).unwrap()
    }

    /// Checks `backward` against finite differences of a random linear
    /// functional of the eval-mode logits.
    pub fn check_gradients(spec: &ModelSpec, g: &Graph, seed: u64) {
        let ctx = GraphContext::new(g, spec).unwrap();
        let mut r = rng::stream(seed, "gradcheck-init");
        let params = init_params(spec, g.num_features(), g.num_classes(), &mut r).unwrap();
        // perturb biases away from zero so they matter
        let mut params = params;
        for (_, p) in params.iter_mut() {
            if p.rows() == 1 {
                *p = crate::nn::glorot_init(1, p.cols(), &mut r);
            }
        }
        let weights = crate::nn::glorot_init(g.num_nodes(), g.num_classes(), &mut r);
        let report = gradcheck(
            |p| {
                let (out, tape) = forward(spec, p, &ctx, &mut Mode::Eval)?;
                let mut loss = out.logits.clone();
                loss.hadamard_assign(&weights)?;
                let grads = backward(spec, p, &ctx, &tape, &weights)?;
                Ok((loss.sum(), grads))
            },
            &params,
            &GradcheckOptions::default(),
        )
        .unwrap();
        assert!(
            report.passed,
            "{} gradcheck failed: max rel err {} at {:?}",
            spec.kind, report.max_rel_error, report.worst
        );
    }
}
