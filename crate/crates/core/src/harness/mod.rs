//! Experiment harness: configs, per-seed runs in parallel, sweeps,
//! aggregation across seeds and report files.

mod aggregate;
mod config;
mod report;
mod run;
mod sweep;

pub use aggregate::{aggregate, MeanSd};
pub use config::{default_sbm, DatasetSource, ExperimentConfig};
pub use report::{emit_reports, emit_sweep, format_summary, load_record, summary_csv, sweep_csv, trace_csv};
pub use run::{
    evaluate_stages, run_experiment, run_experiment_on, seed_graph, summarize, train_for_seed, RunRecord,
    SeedModel, SeedRecord, StageReport, StageSummary, Timing, UNCALIBRATED,
};
pub use sweep::{apply_axis, run_sweep, SweepAxis, SweepRow, SweepSpec, SweepTable};
