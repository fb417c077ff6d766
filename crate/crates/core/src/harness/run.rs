//! One experiment: train per seed, evaluate, calibrate, aggregate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, MeanSd};
use super::config::ExperimentConfig;
use crate::calibrators::{fit_calibrator, CalibratorRecord};
use crate::error::{Error, Result};
use crate::graph::{drop_edges, Graph};
use crate::losses::LossConfig;
use crate::metrics::{self, BinningScheme, MetricsReport};
use crate::models::{train_model, tune_weight_decay, EpochRecord, FittedModel, ModelOutput, TrainedModel};
use crate::rng::derive_seed;

pub const UNCALIBRATED: &str = "uncalibrated";

/// Test-split metrics of one stage: the raw model or one calibrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub metrics: MetricsReport,
    /// Calibrated minus uncalibrated test accuracy.
    pub accuracy_delta: f64,
    pub calibrator: Option<CalibratorRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    /// Loss weight picked on validation ECE, when a grid was searched.
    pub chosen_alpha: Option<f64>,
    pub chosen_weight_decay: Option<f64>,
    pub best_epoch: usize,
    pub trace: Vec<EpochRecord>,
    pub stages: Vec<StageReport>,
}

impl SeedRecord {
    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub accuracy: MeanSd,
    pub ece: MeanSd,
    pub mece: MeanSd,
    pub nll: MeanSd,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_seed_seconds: Vec<f64>,
}

/// Everything an experiment produced. Wall-clock timing is kept out of the
/// serialized record so identical runs serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedRecord>,
    pub summary: Vec<StageSummary>,
    #[serde(skip)]
    pub timing: Timing,
}

impl RunRecord {
    pub fn stage_summary(&self, name: &str) -> Option<&StageSummary> {
        self.summary.iter().find(|s| s.stage == name)
    }
}

/// Model and per-seed tuning choices.
pub struct SeedModel {
    pub trained: TrainedModel,
    pub chosen_alpha: Option<f64>,
    pub chosen_weight_decay: Option<f64>,
}

fn validation_ece(g: &Graph, out: &ModelOutput, bins: usize) -> Result<f64> {
    let (c, ok) = metrics::confidence_and_correctness(&out.probabilities, g.labels(), &g.splits().val);
    metrics::ece(&metrics::reliability(&c, &ok, &BinningScheme::uniform(bins)?)?)
}

/// The graph a seed trains on: `g` itself or a copy with edges dropped
/// under a seed derived from `seed`.
pub fn seed_graph(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<Graph> {
    match cfg.edge_drop_fraction {
        Some(f) if f > 0.0 => drop_edges(g, f, derive_seed(seed, "edge-drop")),
        _ => Ok(g.clone()),
    }
}

/// Trains the configured model for `seed`, searching the loss-weight and
/// weight-decay grids when they apply.
pub fn train_for_seed(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<SeedModel> {
    let train_cfg = cfg.train_config(seed);
    let alphas = cfg.effective_alpha_grid();
    let wd_grid = cfg.effective_weight_decay_grid();
    let mut best: Option<(f64, SeedModel)> = None;
    for &alpha in &alphas {
        let loss = LossConfig {
            alpha,
            ..cfg.loss.clone()
        };
        let (trained, wd) = match &wd_grid {
            Some(grid) => {
                let (wd, t) = tune_weight_decay(g, &cfg.model, &train_cfg, &loss, grid)?;
                (t, Some(wd))
            }
            None => (train_model(g, &cfg.model, &train_cfg, &loss)?, None),
        };
        let candidate = SeedModel {
            trained,
            chosen_alpha: (alphas.len() > 1).then_some(alpha),
            chosen_weight_decay: wd,
        };
        if alphas.len() == 1 {
            return Ok(candidate);
        }
        let out = candidate.trained.model.predict_graph(g)?;
        let e = validation_ece(g, &out, cfg.loss.num_bins)?;
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, candidate));
        }
    }
    best.map(|(_, m)| m).ok_or(Error::Empty("alpha grid"))
}

/// Test metrics of the uncalibrated model and of every configured
/// calibrator fit on the validation split.
pub fn evaluate_stages(cfg: &ExperimentConfig, g: &Graph, model: &FittedModel) -> Result<Vec<StageReport>> {
    let scheme = BinningScheme::uniform(cfg.num_bins)?;
    let test = &g.splits().test;
    let out = model.predict_graph(g)?;
    let base = metrics::evaluate(&out.probabilities, g.labels(), test, &scheme)?;
    let base_acc = base.accuracy;
    let mut stages = vec![StageReport {
        stage: UNCALIBRATED.into(),
        metrics: base,
        accuracy_delta: 0.0,
        calibrator: None,
    }];
    for &kind in &cfg.calibrators {
        let rec = fit_calibrator(kind, g, &out, &g.splits().val, &cfg.calibration)?;
        let probs = rec.apply(g, &out)?;
        let m = metrics::evaluate(&probs, g.labels(), test, &scheme)?;
        stages.push(StageReport {
            stage: kind.name().into(),
            accuracy_delta: m.accuracy - base_acc,
            metrics: m,
            calibrator: Some(rec),
        });
    }
    Ok(stages)
}

fn run_seed(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<SeedRecord> {
    let g = seed_graph(cfg, g, seed)?;
    let m = train_for_seed(cfg, &g, seed)?;
    let stages = evaluate_stages(cfg, &g, &m.trained.model)?;
    log::info!(
        "seed {seed}: test accuracy {:.4}, ECE {:.4}",
        stages[0].metrics.accuracy,
        stages[0].metrics.ece
    );
    Ok(SeedRecord {
        seed,
        chosen_alpha: m.chosen_alpha,
        chosen_weight_decay: m.chosen_weight_decay,
        best_epoch: m.trained.best_epoch,
        trace: m.trained.trace,
        stages,
    })
}

/// Mean ± SD per stage over seed records.
pub fn summarize(records: &[SeedRecord]) -> Result<Vec<StageSummary>> {
    let first = records.first().ok_or(Error::Empty("seed records"))?;
    first
        .stages
        .iter()
        .map(|s| {
            let pick = |f: fn(&MetricsReport) -> f64| -> Result<MeanSd> {
                let v: Vec<f64> = records
                    .iter()
                    .map(|r| {
                        r.stage(&s.stage).map(|st| f(&st.metrics)).ok_or_else(|| {
                            Error::InvalidArgument(format!("seed {} lacks stage {}", r.seed, s.stage))
                        })
                    })
                    .collect::<Result<_>>()?;
                aggregate(&v)
            };
            Ok(StageSummary {
                stage: s.stage.clone(),
                accuracy: pick(|m| m.accuracy)?,
                ece: pick(|m| m.ece)?,
                mece: pick(|m| m.mece)?,
                nll: pick(|m| m.nll)?,
            })
        })
        .collect()
}

fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every seed of `cfg` on the already loaded graph `g`.
pub fn run_experiment_on(cfg: &ExperimentConfig, g: &Graph) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = worker_pool(cfg.jobs)?;
    let results: Vec<(Result<SeedRecord>, f64)> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| {
                let t = Instant::now();
                let r = run_seed(cfg, g, seed).map_err(|e| Error::Seed {
                    seed,
                    source: Box::new(e),
                });
                (r, t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut seeds = Vec::with_capacity(results.len());
    let mut per_seed_seconds = Vec::with_capacity(results.len());
    for (r, secs) in results {
        seeds.push(r?);
        per_seed_seconds.push(secs);
    }
    let summary = summarize(&seeds)?;
    Ok(RunRecord {
        config: cfg.clone(),
        seeds,
        summary,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            per_seed_seconds,
        },
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let g = cfg.dataset.load()?;
    run_experiment_on(cfg, &g)
}
