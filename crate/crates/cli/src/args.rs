use std::path::PathBuf;

use calgnn::calibrators::CalibratorKind;
use calgnn::harness::{DatasetSource, ExperimentConfig};
use calgnn::losses::{LossConfig, LossMode};
use calgnn::models::ModelKind;
use calgnn::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "calgnn",
    version,
    about = "Calibration experiments for graph neural networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train, evaluate and calibrate every seed, then write all reports.
    Run(RunArgs),
    /// Train every seed and save `model_{seed}.bin` and `trace_{seed}.csv`.
    Train(RunArgs),
    /// Evaluate a saved model on the test split.
    Evaluate(ModelFileArgs),
    /// Fit calibrators for a saved model on the validation split and
    /// evaluate them on the test split.
    Calibrate(CalibrateArgs),
    /// Run one experiment per value of a swept setting.
    Sweep(SweepArgs),
    /// Print the summary of a finished run; optionally re-emit its reports.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    /// TOML or JSON experiment file; other flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset bundle directory, or `sbm[:key=value,...]` for a synthetic graph.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, value_parser = ["gcn", "gat", "sgc", "gfnn", "appnp"])]
    pub model: Option<String>,
    /// Comma-separated calibrators (temperature, histogram, isotonic, bbq, rbs, rrbs) or `all`.
    #[arg(long)]
    pub calibrators: Option<String>,
    /// Use seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<u64>,
    /// Explicit comma-separated seeds.
    #[arg(long)]
    pub seed_list: Option<String>,
    /// Bins for ECE, MECE and reliability diagrams.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_parser = ["ce", "ce+cal"])]
    pub loss: Option<String>,
    /// Fixed cross-entropy weight for `ce+cal`; searched on validation when absent.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override the training epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for the seed loop.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// width, depth, density, loss-alpha or weight-decay.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values.
    #[arg(long)]
    pub values: String,
}

#[derive(Args, Debug)]
pub struct ModelFileArgs {
    /// Dataset bundle directory, or `sbm[:key=value,...]`.
    #[arg(long)]
    pub data: String,
    /// Model saved by `train`.
    #[arg(long)]
    pub model_file: PathBuf,
    #[arg(long, default_value_t = calgnn::metrics::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub model: ModelFileArgs,
    #[arg(long, default_value = "all")]
    pub calibrators: String,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// `summary.json` or the directory holding it.
    pub path: PathBuf,
    /// Re-emit every report file into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dataset(s: &str) -> Result<DatasetSource> {
    DatasetSource::parse(s)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| Error::Config(format!("not a number: {p:?}")))
        })
        .collect()
}

pub fn parse_calibrators(s: &str) -> Result<Vec<CalibratorKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(CalibratorKind::ALL.to_vec());
    }
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

impl ExperimentArgs {
    /// Config file (if any) with command-line overrides applied.
    pub fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.data) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(_)) => {
                let mut cfg = ExperimentConfig::new(
                    DatasetSource::parse("sbm")?,
                    self.model.as_deref().unwrap_or("gcn").parse()?,
                    10,
                );
                cfg.calibrators = CalibratorKind::ALL.to_vec();
                cfg
            }
            (None, None) => return Err(Error::Config("either --config or --data is required".into())),
        };
        if let Some(d) = &self.data {
            cfg.dataset = dataset(d)?;
        }
        if let Some(m) = &self.model {
            let kind: ModelKind = m.parse()?;
            if kind != cfg.model.kind {
                cfg.model = calgnn::models::ModelSpec::default_for(kind);
                cfg.train = None;
            }
        }
        if let Some(c) = &self.calibrators {
            cfg.calibrators = parse_calibrators(c)?;
        }
        if let Some(n) = self.seeds {
            cfg.seeds = (0..n).collect();
        }
        if let Some(list) = &self.seed_list {
            cfg.seeds = list
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| p.parse().map_err(|_| Error::Config(format!("not a seed: {p:?}"))))
                .collect::<Result<_>>()?;
        }
        if let Some(b) = self.bins {
            cfg.num_bins = b;
            cfg.loss.num_bins = b;
            cfg.calibration.histogram_bins = b;
            cfg.calibration.ece_bins = b;
        }
        match self.loss.as_deref() {
            Some("ce") => {
                cfg.loss = LossConfig {
                    mode: LossMode::CeOnly,
                    alpha: 1.0,
                    ..cfg.loss
                }
            }
            Some("ce+cal") => cfg.loss.mode = LossMode::CePlusCal,
            _ => {}
        }
        if let Some(a) = self.alpha {
            cfg.loss.alpha = a;
            cfg.alpha_grid = Some(vec![a]);
        }
        if let Some(e) = self.epochs {
            let mut t = cfg.train_config(0);
            t.max_epochs = e;
            cfg.train = Some(t);
        }
        if let Some(w) = self.width {
            cfg.model.width = w;
        }
        if let Some(d) = self.depth {
            cfg.model.depth = d;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn output_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        cfg.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("calgnn-out"))
    }
}
