//! Report files: `summary.json`, `timing.json`, `summary.csv`,
//! `reliability_{seed}_{stage}.csv`, `trace_{seed}.csv` and `sweep.csv`.
//! Tables give accuracy, ECE and MECE in percent with two decimals; JSON
//! keeps raw fractions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::aggregate::MeanSd;
use super::run::{RunRecord, StageSummary};
use super::sweep::SweepTable;
use crate::error::{Error, Result};
use crate::models::EpochRecord;

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn pct(m: &MeanSd) -> (String, String) {
    (format!("{:.2}", 100.0 * m.mean), format!("{:.2}", 100.0 * m.sd))
}

const STAGE_COLUMNS: &str = "n,accuracy_mean,accuracy_sd,ece_mean,ece_sd,mece_mean,mece_sd,nll_mean,nll_sd";

fn stage_cells(s: &StageSummary) -> String {
    let (am, asd) = pct(&s.accuracy);
    let (em, esd) = pct(&s.ece);
    let (mm, msd) = pct(&s.mece);
    format!(
        "{},{am},{asd},{em},{esd},{mm},{msd},{:.4},{:.4}",
        s.accuracy.n, s.nll.mean, s.nll.sd
    )
}

pub fn summary_csv(summary: &[StageSummary]) -> String {
    let mut out = format!("stage,{STAGE_COLUMNS}\n");
    for s in summary {
        let _ = writeln!(out, "{},{}", s.stage, stage_cells(s));
    }
    out
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!("axis,value,stage,{STAGE_COLUMNS}\n");
    for row in &table.rows {
        for s in &row.stages {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                table.axis.name(),
                row.value,
                s.stage,
                stage_cells(s)
            );
        }
    }
    out
}

/// `epoch,train_loss,val_loss,test_accuracy,test_nll,test_ece`, one row per
/// epoch run; missing values are blank.
pub fn trace_csv(trace: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,test_accuracy,test_nll,test_ece\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            opt(r.val_loss),
            opt(r.test_accuracy),
            opt(r.test_nll),
            opt(r.test_ece)
        );
    }
    out
}

/// Writes every per-run file into `dir`, creating it if needed, and returns
/// the paths written.
pub fn emit_reports(record: &RunRecord, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![
        write(dir.join("summary.json"), serde_json::to_string_pretty(record)?)?,
        write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&record.timing)?,
        )?,
        write(dir.join("summary.csv"), summary_csv(&record.summary))?,
    ];
    for s in &record.seeds {
        written.push(write(
            dir.join(format!("trace_{}.csv", s.seed)),
            trace_csv(&s.trace),
        )?);
        for st in &s.stages {
            written.push(write(
                dir.join(format!("reliability_{}_{}.csv", s.seed, st.stage)),
                st.metrics.reliability.to_csv(),
            )?);
        }
    }
    Ok(written)
}

pub fn emit_sweep(table: &SweepTable, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(vec![
        write(dir.join("sweep.csv"), sweep_csv(table))?,
        write(dir.join("sweep.json"), serde_json::to_string_pretty(table)?)?,
    ])
}

pub fn load_record(path: impl AsRef<Path>) -> Result<RunRecord> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// Plain-text table of a summary, percentages as `mean ± sd`.
pub fn format_summary(summary: &[StageSummary]) -> String {
    let mut out = format!(
        "{:<13} {:>16} {:>16} {:>16} {:>16}\n",
        "stage", "accuracy %", "ECE %", "MECE %", "NLL"
    );
    for s in summary {
        let cell = |m: &MeanSd| format!("{:.2} ± {:.2}", 100.0 * m.mean, 100.0 * m.sd);
        let _ = writeln!(
            out,
            "{:<13} {:>16} {:>16} {:>16} {:>16}",
            s.stage,
            cell(&s.accuracy),
            cell(&s.ece),
            cell(&s.mece),
            format!("{:.4} ± {:.4}", s.nll.mean, s.nll.sd)
        );
    }
    out
}
