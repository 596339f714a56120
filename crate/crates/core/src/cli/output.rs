//! CSV and JSON files written by a run.
//!
//! Floating-point columns use 17 significant digits so every value parses
//! back to the same `f64`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::RunConfig;
use crate::diagnostics::{Outcome, RunRecord, Snapshot};
use crate::wavestate::WaveState;

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const TRAJECTORIES_HEADER: &str = "step,time,index,q,v,C,S";
pub const DIAGNOSTICS_HEADER: &str = "step,time,min_spacing,l2_error,norm,equivariance";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `{:.16e}`: one digit before the point and sixteen after.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn write_trajectories(path: &Path, snapshots: &[Snapshot]) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(w, "{TRAJECTORIES_HEADER}")?;
        for snap in snapshots {
            let s = &snap.state;
            let time = fmt_f64(s.time());
            for j in 0..s.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    snap.step,
                    time,
                    j,
                    fmt_f64(s.positions()[j]),
                    fmt_f64(s.velocity()[j]),
                    fmt_f64(s.log_amp()[j]),
                    fmt_f64(s.phase()[j]),
                )?;
            }
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

/// Parses a trajectories file back into snapshots, in file order.
pub fn read_trajectories(path: &Path) -> Result<Vec<Snapshot>, OutputError> {
    let file = File::open(path).map_err(io_err(path))?;
    let malformed = |line: usize, message: String| OutputError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };

    struct Pending {
        step: usize,
        time: f64,
        cols: [Vec<f64>; 4],
    }
    let finish = |p: Pending, line: usize| -> Result<Snapshot, OutputError> {
        let [q, v, c, s] = p.cols;
        let state =
            WaveState::new(q, c, s, v, p.time).map_err(|e| malformed(line, e.to_string()))?;
        Ok(Snapshot {
            step: p.step,
            state,
        })
    };

    let mut snapshots = Vec::new();
    let mut pending: Option<Pending> = None;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == TRAJECTORIES_HEADER => {}
        Some((_, Err(e))) => return Err(io_err(path)(e)),
        _ => {
            return Err(malformed(
                1,
                format!("expected header `{TRAJECTORIES_HEADER}`"),
            ))
        }
    }
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(malformed(
                lineno,
                format!("expected 7 columns, found {}", fields.len()),
            ));
        }
        let int = |k: usize| {
            fields[k]
                .trim()
                .parse::<usize>()
                .map_err(|e| malformed(lineno, format!("column {k}: {e}")))
        };
        let real = |k: usize| {
            fields[k]
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(lineno, format!("column {k}: {e}")))
        };
        let (step, index, time) = (int(0)?, int(2)?, real(1)?);
        if pending.as_ref().is_none_or(|p| p.step != step) {
            if let Some(p) = pending.take() {
                snapshots.push(finish(p, lineno)?);
            }
            pending = Some(Pending {
                step,
                time,
                cols: Default::default(),
            });
        }
        let p = pending.as_mut().expect("just set");
        if index != p.cols[0].len() {
            return Err(malformed(
                lineno,
                format!("expected point index {}, found {index}", p.cols[0].len()),
            ));
        }
        for (col, k) in p.cols.iter_mut().zip(3..7) {
            col.push(real(k)?);
        }
    }
    if let Some(p) = pending {
        snapshots.push(finish(p, 0)?);
    }
    Ok(snapshots)
}

/// One row per step. Norm, L2 error and equivariance are filled in only on
/// snapshot steps.
pub fn write_diagnostics(path: &Path, record: &RunRecord) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let mut body = || -> io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        let mut snaps = record.snapshot_series.iter().peekable();
        for sample in &record.min_spacing_series {
            while snaps.peek().is_some_and(|d| d.step < sample.step) {
                snaps.next();
            }
            let diag = snaps.peek().filter(|d| d.step == sample.step);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                sample.step,
                fmt_f64(sample.time),
                fmt_f64(sample.min_spacing),
                fmt_opt(diag.and_then(|d| d.l2_error)),
                fmt_opt(diag.map(|d| d.norm)),
                fmt_opt(diag.map(|d| d.equivariance)),
            )?;
        }
        w.flush()
    };
    body().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingSummary {
    pub step: usize,
    pub time: f64,
    pub pair_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub outcome: String,
    pub steps_requested: usize,
    pub steps_taken: usize,
    pub final_time: f64,
    pub crossing: Option<CrossingSummary>,
    pub failure: Option<String>,
    pub initial_norm: f64,
    pub final_norm: Option<f64>,
    pub final_l2_error: Option<f64>,
    pub final_equivariance: Option<f64>,
    pub wall_clock_seconds: f64,
    /// The configuration after command-line overrides; enough to rerun.
    pub config: RunConfig,
}

impl Summary {
    pub fn new(record: &RunRecord, config: &RunConfig, wall_clock_seconds: f64) -> Self {
        let last = record.snapshot_series.last();
        let (crossing, failure) = match &record.outcome {
            Outcome::Completed => (None, None),
            Outcome::Crossed {
                step,
                time,
                pair_index,
            } => (
                Some(CrossingSummary {
                    step: *step,
                    time: *time,
                    pair_index: *pair_index,
                }),
                None,
            ),
            Outcome::Failed { reason, .. } => (None, Some(reason.clone())),
        };
        Self {
            outcome: record.outcome.label().to_string(),
            steps_requested: config.step.num_steps,
            steps_taken: record.steps_taken,
            final_time: record.final_state.time(),
            crossing,
            failure,
            initial_norm: record.snapshot_series.first().map_or(f64::NAN, |d| d.norm),
            final_norm: last.map(|d| d.norm),
            final_l2_error: last.and_then(|d| d.l2_error),
            final_equivariance: last.map(|d| d.equivariance),
            wall_clock_seconds,
            config: config.clone(),
        }
    }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), OutputError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<Summary, OutputError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| OutputError::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}
