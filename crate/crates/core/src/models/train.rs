//! Full-batch training with Adam, early stopping and a per-epoch trace.

use serde::{Deserialize, Serialize};

use super::{backward, forward, FittedModel, GraphContext, Mode, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::losses::{cross_entropy, training_objective, LossConfig};
use crate::metrics::{self, BinningScheme, DEFAULT_BINS};
use crate::nn::{adam_step, AdamState, DenseMatrix, EarlyStopping, StopDecision, TrainConfig};
use crate::rng;

/// Weight-decay candidates for SGC: eight log-spaced values from 1e-6 to 1e-3.
pub const SGC_WEIGHT_DECAY_GRID: [f64; 8] = [
    1e-6,
    2.682695795279725e-6,
    7.196856730011521e-6,
    1.9306977288832496e-5,
    5.1794746792312125e-5,
    1.389495494373136e-4,
    3.727593720314938e-4,
    1e-3,
];

/// Optimization defaults per architecture.
pub fn default_train_config(kind: ModelKind) -> TrainConfig {
    let base = TrainConfig::default();
    match kind {
        ModelKind::Gcn => base,
        ModelKind::Gat => TrainConfig {
            learning_rate: 0.005,
            dropout: 0.6,
            max_epochs: 1000,
            patience: Some(100),
            ..base
        },
        ModelKind::Sgc => TrainConfig {
            learning_rate: 0.2,
            weight_decay: SGC_WEIGHT_DECAY_GRID[4],
            max_epochs: 100,
            patience: None,
            dropout: 0.0,
            ..base
        },
        ModelKind::Gfnn => TrainConfig {
            max_epochs: 50,
            patience: None,
            ..base
        },
        ModelKind::Appnp => TrainConfig {
            max_epochs: 1000,
            patience: Some(100),
            ..base
        },
    }
}

/// Metrics recorded after the parameter update of one epoch, from an
/// eval-mode forward pass. Entries for an empty split are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_nll: Option<f64>,
    pub test_ece: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: FittedModel,
    pub trace: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (the last one without early stopping).
    pub best_epoch: usize,
}

fn record(
    epoch: usize,
    g: &Graph,
    logits: &DenseMatrix,
    probs: &DenseMatrix,
    scheme: &BinningScheme,
) -> Result<EpochRecord> {
    let s = g.splits();
    let labels = g.labels();
    let train_loss = cross_entropy(logits, labels, &s.train)?.0;
    let opt = |mask: &[usize]| (!mask.is_empty()).then_some(());
    let val_loss = opt(&s.val)
        .map(|_| cross_entropy(logits, labels, &s.val).map(|r| r.0))
        .transpose()?;
    let val_accuracy = opt(&s.val)
        .map(|_| metrics::accuracy(probs, labels, &s.val))
        .transpose()?;
    let test_accuracy = opt(&s.test)
        .map(|_| metrics::accuracy(probs, labels, &s.test))
        .transpose()?;
    let test_nll = opt(&s.test)
        .map(|_| metrics::nll(probs, labels, &s.test))
        .transpose()?;
    let test_ece = opt(&s.test)
        .map(|_| {
            let (c, ok) = metrics::confidence_and_correctness(probs, labels, &s.test);
            metrics::ece(&metrics::reliability(&c, &ok, scheme)?)
        })
        .transpose()?;
    Ok(EpochRecord {
        epoch,
        train_loss,
        val_loss,
        val_accuracy,
        test_accuracy,
        test_nll,
        test_ece,
    })
}

/// Trains on the training split of `g`. Deterministic for a fixed
/// `cfg.seed`: initialization and dropout draw from named streams of it.
pub fn train_model(
    g: &Graph,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<TrainedModel> {
    spec.validate()?;
    cfg.validate()?;
    loss_cfg.validate()?;
    let splits = g.splits();
    if splits.train.is_empty() {
        return Err(Error::Empty("training split"));
    }
    if cfg.patience.is_some() && splits.val.is_empty() {
        return Err(Error::Config("early stopping needs a validation split".into()));
    }
    let ctx = GraphContext::new(g, spec)?;
    let mut model = FittedModel::init(spec.clone(), g.num_features(), g.num_classes(), cfg.seed)?;
    let mut adam = AdamState::new(&model.params);
    let mut dropout_rng = rng::stream(cfg.seed, "dropout");
    let mut stopper = cfg.patience.map(EarlyStopping::new);
    let scheme = BinningScheme::uniform(DEFAULT_BINS)?;
    let mut best = model.params.clone();
    let mut best_epoch = 0;
    let mut trace = Vec::with_capacity(cfg.max_epochs);
    for epoch in 1..=cfg.max_epochs {
        let mut mode = Mode::Train {
            dropout: cfg.dropout,
            rng: &mut dropout_rng,
        };
        let (out, tape) = forward(spec, &model.params, &ctx, &mut mode)?;
        let (loss, dlogits) = training_objective(
            &out.logits,
            g.labels(),
            &splits.train,
            epoch - 1,
            cfg.max_epochs,
            loss_cfg,
        )?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let grads = backward(spec, &model.params, &ctx, &tape, &dlogits)?;
        adam_step(
            &mut model.params,
            &grads,
            &mut adam,
            cfg.learning_rate,
            cfg.weight_decay,
        )
        .map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence { epoch, loss },
            other => other,
        })?;
        let eval = model.predict(&ctx)?;
        if !eval.logits.all_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        let rec = record(epoch, g, &eval.logits, &eval.probabilities, &scheme)?;
        let val_loss = rec.val_loss;
        trace.push(rec);
        match (&mut stopper, val_loss) {
            (Some(s), Some(v)) => match s.update(epoch, v) {
                StopDecision::Continue { improved: true } => {
                    best = model.params.clone();
                    best_epoch = epoch;
                }
                StopDecision::Continue { improved: false } => {}
                StopDecision::Stop => break,
            },
            _ => best_epoch = epoch,
        }
        log::trace!("{} epoch {epoch}: loss {loss:.5}", spec.kind);
    }
    if stopper.is_some() {
        model.params = best;
    }
    Ok(TrainedModel {
        model,
        trace,
        best_epoch,
    })
}

/// Trains once per weight decay in `grid` and keeps the run with the lowest
/// validation NLL. Ties keep the earlier grid value.
pub fn tune_weight_decay(
    g: &Graph,
    spec: &ModelSpec,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    grid: &[f64],
) -> Result<(f64, TrainedModel)> {
    if g.splits().val.is_empty() {
        return Err(Error::Config(
            "weight-decay tuning needs a validation split".into(),
        ));
    }
    let mut best: Option<(f64, f64, TrainedModel)> = None;
    for &wd in grid {
        let run = train_model(
            g,
            spec,
            &TrainConfig {
                weight_decay: wd,
                ..cfg.clone()
            },
            loss_cfg,
        )?;
        let out = run.model.predict_graph(g)?;
        let v = metrics::nll(&out.probabilities, g.labels(), &g.splits().val)?;
        if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
            best = Some((v, wd, run));
        }
    }
    let (_, wd, run) = best.ok_or(Error::Empty("weight-decay grid"))?;
    Ok((wd, run))
}
