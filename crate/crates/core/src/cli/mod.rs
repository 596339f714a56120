//! Command-line front end.
//!
//! Exit codes: 0 completed, 3 trajectory crossing, 4 failed run,
//! 2 configuration or usage error, 1 I/O error.

pub mod config;
pub mod fields;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::diagnostics::{Outcome, RunRecord, Snapshot};
use crate::dynamics::{run, DynamicsError, RunOptions};
use crate::gridinit::GridError;
use crate::wavestate::{init_from_analytic, StateError};
use config::{load_config, ConfigError, EstimatorName, GridKindName, RunConfig};
use output::{OutputError, Summary, DIAGNOSTICS_FILE, SUMMARY_FILE, TRAJECTORIES_FILE};

pub const EXIT_COMPLETED: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CROSSED: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "bohmgrid",
    version,
    about = "Bohmian trajectory-grid simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Lsq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Uniform,
    Quantile,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation and write its trajectories and diagnostics.
    Simulate {
        /// Config file, or `paper_polyfit` / `paper_lsq` for a bundled one.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Snapshot stride in steps (overrides the config).
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Replace both fitting estimators.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Write fitted fields for snapshots of a finished run.
    Fields {
        /// Directory written by `simulate`.
        #[arg(long)]
        record: PathBuf,
        /// Snapshot times, comma separated.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        times: Vec<f64>,
    },
    /// Write initial grid positions without running.
    InitGrid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Usage(String),
    #[error("grid construction failed: {0}")]
    Grid(#[from] GridError),
    #[error("initial state: {0}")]
    State(#[from] StateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Output(OutputError::Io { .. }) => {
                EXIT_IO
            }
            CliError::Config(_)
            | CliError::Usage(_)
            | CliError::Output(OutputError::Malformed { .. }) => EXIT_USAGE,
            CliError::Grid(_) | CliError::State(_) | CliError::Dynamics(_) => EXIT_FAILED,
        }
    }
}

pub fn outcome_exit_code(outcome: &Outcome) -> i32 {
    match outcome {
        Outcome::Completed => EXIT_COMPLETED,
        Outcome::Crossed { .. } => EXIT_CROSSED,
        Outcome::Failed { .. } => EXIT_FAILED,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Messages go to stdout and stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_COMPLETED
            };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate {
            config,
            output,
            snapshot_every,
            method,
        } => {
            let mut cfg = load_config(config)?;
            if let Some(dir) = output {
                cfg.output.directory = dir.clone();
            }
            if let Some(k) = snapshot_every {
                cfg.output.snapshot_every = *k;
            }
            if let Some(m) = method {
                cfg.override_method(match m {
                    MethodArg::Exact => EstimatorName::Exact,
                    MethodArg::Lsq => EstimatorName::Lsq,
                });
            }
            cfg.validate()?;
            let (record, summary) = simulate(&cfg)?;
            println!(
                "{}: {} steps, t = {}, written to {}",
                record.outcome,
                record.steps_taken,
                summary.final_time,
                cfg.output.directory.display()
            );
            Ok(outcome_exit_code(&record.outcome))
        }
        Command::Fields { record, times } => {
            let written = emit_fields_from_record(record, times)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(EXIT_COMPLETED)
        }
        Command::InitGrid { config, kind, out } => {
            let cfg = load_config(config)?;
            let kind = match kind {
                KindArg::Uniform => GridKindName::Uniform,
                KindArg::Quantile => GridKindName::Quantile,
                KindArg::Random => GridKindName::Random,
            };
            let xs = cfg
                .grid_spec(Some(kind))?
                .build(&cfg.analytic_state(), cfg.step.dt)?;
            write_grid(out, &xs)?;
            println!("{} points written to {}", xs.len(), out.display());
            Ok(EXIT_COMPLETED)
        }
    }
}

/// Runs `cfg` and writes every enabled output into its directory.
/// `summary.json` is always written.
pub fn simulate(cfg: &RunConfig) -> Result<(RunRecord, Summary), CliError> {
    let reference = cfg.analytic_state();
    let positions = cfg.grid_spec(None)?.build(&reference, cfg.step.dt)?;
    let initial = init_from_analytic(&reference, &positions)?;
    let options = RunOptions {
        snapshot_every: cfg.output.snapshot_every,
        reference: Some(reference.clone()),
    };
    let started = Instant::now();
    let record = run(
        &initial,
        &cfg.step_config(),
        cfg.step.num_steps,
        &options,
        &mut [],
    )?;
    let elapsed = started.elapsed().as_secs_f64();

    let dir = &cfg.output.directory;
    std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.clone(),
        source,
    })?;
    if cfg.output.trajectories {
        output::write_trajectories(&dir.join(TRAJECTORIES_FILE), &record.snapshots)?;
    }
    if cfg.output.errors {
        output::write_diagnostics(&dir.join(DIAGNOSTICS_FILE), &record)?;
    }
    if cfg.output.fields {
        for &t in &cfg.output.field_times {
            match find_snapshot(&record.snapshots, t, cfg.step.dt) {
                Some(snap) => {
                    write_fields_for(cfg, snap, dir)?;
                }
                None => eprintln!("warning: no snapshot at t = {t}; fields not written"),
            }
        }
    }
    let summary = Summary::new(&record, cfg, elapsed);
    output::write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    Ok((record, summary))
}

/// Snapshot whose time is within a quarter step of `t`.
pub fn find_snapshot(snapshots: &[Snapshot], t: f64, dt: f64) -> Option<&Snapshot> {
    snapshots
        .iter()
        .find(|s| (s.state.time() - t).abs() <= 0.25 * dt)
}

fn write_fields_for(cfg: &RunConfig, snap: &Snapshot, dir: &Path) -> Result<PathBuf, CliError> {
    let samples = fields::sample_fields(
        &snap.state,
        &cfg.amp_policy(),
        &cfg.phase_policy(),
        &cfg.analytic_state(),
        cfg.output.field_samples,
    )
    .map_err(|e| {
        CliError::Usage(format!(
            "fitting snapshot at step {} failed: {e}",
            snap.step
        ))
    })?;
    let path = dir.join(format!("fields_{}.csv", snap.step));
    fields::write_fields(&path, &samples)?;
    Ok(path)
}

/// The `fields` command: reads `summary.json` and `trajectories.csv` from
/// `record_dir` and writes one `fields_<step>.csv` per requested time.
pub fn emit_fields_from_record(record_dir: &Path, times: &[f64]) -> Result<Vec<PathBuf>, CliError> {
    let summary = output::read_summary(&record_dir.join(SUMMARY_FILE))?;
    let cfg = summary.config;
    let snapshots = output::read_trajectories(&record_dir.join(TRAJECTORIES_FILE))?;
    let mut written = Vec::with_capacity(times.len());
    for &t in times {
        let snap = find_snapshot(&snapshots, t, cfg.step.dt).ok_or_else(|| {
            let available: Vec<String> = snapshots
                .iter()
                .map(|s| format!("{}", s.state.time()))
                .collect();
            CliError::Usage(format!(
                "no snapshot at t = {t}; available times: {}",
                available.join(", ")
            ))
        })?;
        written.push(write_fields_for(&cfg, snap, record_dir)?);
    }
    Ok(written)
}

fn write_grid(path: &Path, xs: &[f64]) -> Result<(), OutputError> {
    let mut text = String::from("index,q\n");
    for (j, x) in xs.iter().enumerate() {
        text.push_str(&format!("{j},{}\n", output::fmt_f64(*x)));
    }
    std::fs::write(path, text).map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}
