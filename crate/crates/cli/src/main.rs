//! `calgnn`: train graph neural networks, measure their calibration and fit
//! post-hoc calibrators from the command line.

mod args;

use std::path::Path;
use std::process::ExitCode;

use calgnn::calibrators::fit_calibrator;
use calgnn::harness::{
    emit_reports, emit_sweep, format_summary, load_record, run_experiment, run_sweep, trace_csv,
    train_for_seed, SweepSpec,
};
use calgnn::metrics::{self, BinningScheme};
use calgnn::models::{load_model, save_model};
use calgnn::{Error, Result};
use clap::Parser;

use args::{Cli, Command, ModelFileArgs};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => {
            let cfg = a.experiment.build()?;
            let out = a.experiment.output_dir(&cfg);
            let rec = run_experiment(&cfg)?;
            emit_reports(&rec, &out)?;
            print!("{}", format_summary(&rec.summary));
            println!("reports written to {}", out.display());
            Ok(())
        }
        Command::Train(a) => {
            let cfg = a.experiment.build()?;
            cfg.validate()?;
            let out = a.experiment.output_dir(&cfg);
            create_dir(&out)?;
            let g = cfg.dataset.load()?;
            for &seed in &cfg.seeds {
                let m = train_for_seed(&cfg, &g, seed).map_err(|e| Error::Seed {
                    seed,
                    source: Box::new(e),
                })?;
                let path = out.join(format!("model_{seed}.bin"));
                save_model(&m.trained.model, &path)?;
                write_file(
                    &out.join(format!("trace_{seed}.csv")),
                    trace_csv(&m.trained.trace),
                )?;
                let last = m.trained.trace.last();
                println!(
                    "seed {seed}: {} epochs, best epoch {}, test accuracy {}, saved {}",
                    m.trained.trace.len(),
                    m.trained.best_epoch,
                    last.and_then(|r| r.test_accuracy)
                        .map_or_else(|| "n/a".into(), |a| format!("{:.2}%", 100.0 * a)),
                    path.display()
                );
            }
            Ok(())
        }
        Command::Evaluate(a) => evaluate(&a),
        Command::Calibrate(a) => calibrate(&a),
        Command::Sweep(a) => {
            let base = a.experiment.build()?;
            let out = a.experiment.output_dir(&base);
            let spec = SweepSpec {
                axis: a.axis.parse()?,
                values: args::parse_f64_list(&a.values)?,
                base,
            };
            let (table, _) = run_sweep(&spec)?;
            emit_sweep(&table, &out)?;
            print!("{}", calgnn::harness::sweep_csv(&table));
            Ok(())
        }
        Command::Report(a) => {
            let path = if a.path.is_dir() {
                a.path.join("summary.json")
            } else {
                a.path.clone()
            };
            let rec = load_record(&path)?;
            print!("{}", format_summary(&rec.summary));
            if let Some(dir) = &a.out {
                emit_reports(&rec, dir)?;
                println!("reports written to {}", dir.display());
            }
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_pair(a: &ModelFileArgs) -> Result<(calgnn::graph::Graph, calgnn::models::FittedModel)> {
    let source = args::dataset(&a.data)?;
    let g = source.load()?;
    let model = load_model(&a.model_file)?;
    Ok((g, model))
}

fn evaluate(a: &ModelFileArgs) -> Result<()> {
    let (g, model) = load_pair(a)?;
    let out = model.predict_graph(&g)?;
    let scheme = BinningScheme::uniform(a.bins)?;
    let report = metrics::evaluate(&out.probabilities, g.labels(), &g.splits().test, &scheme)?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_file(
            &dir.join("reliability_uncalibrated.csv"),
            report.reliability.to_csv(),
        )?;
        write_file(
            &dir.join("metrics_uncalibrated.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    println!(
        "accuracy {:.2}%  ECE {:.2}%  MECE {:.2}%  NLL {:.4}",
        100.0 * report.accuracy,
        100.0 * report.ece,
        100.0 * report.mece,
        report.nll
    );
    Ok(())
}

fn calibrate(a: &args::CalibrateArgs) -> Result<()> {
    let (g, model) = load_pair(&a.model)?;
    let kinds = args::parse_calibrators(&a.calibrators)?;
    let out = model.predict_graph(&g)?;
    let scheme = BinningScheme::uniform(a.model.bins)?;
    let test = &g.splits().test;
    let base = metrics::evaluate(&out.probabilities, g.labels(), test, &scheme)?;
    println!(
        "{:<13} accuracy {:.2}%  ECE {:.2}%  MECE {:.2}%  NLL {:.4}",
        "uncalibrated",
        100.0 * base.accuracy,
        100.0 * base.ece,
        100.0 * base.mece,
        base.nll
    );
    let opts = calgnn::calibrators::CalibrationOptions {
        histogram_bins: a.model.bins,
        ece_bins: a.model.bins,
        ..Default::default()
    };
    if let Some(dir) = &a.model.out {
        create_dir(dir)?;
    }
    for kind in kinds {
        let rec = fit_calibrator(kind, &g, &out, &g.splits().val, &opts)?;
        let probs = rec.apply(&g, &out)?;
        let m = metrics::evaluate(&probs, g.labels(), test, &scheme)?;
        println!(
            "{:<13} accuracy {:.2}%  ECE {:.2}%  MECE {:.2}%  NLL {:.4}",
            kind.name(),
            100.0 * m.accuracy,
            100.0 * m.ece,
            100.0 * m.mece,
            m.nll
        );
        if let Some(dir) = &a.model.out {
            rec.save(dir.join(format!("calibrator_{kind}.json")))?;
            write_file(
                &dir.join(format!("reliability_{kind}.csv")),
                m.reliability.to_csv(),
            )?;
        }
    }
    Ok(())
}
