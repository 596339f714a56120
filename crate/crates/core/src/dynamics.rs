//! Explicit time stepping of the hydrodynamic equations along the grid.
//!
//! Each step has two phases:
//!
//! * A, against the old state: fit `C` on the old positions, evaluate the
//!   quantum potential `Q = -(C'' + C'^2) / 2` at each old position, then
//!   `S += (v^2/2 - V - Q) dt` and `q += v dt`.
//! * B, against the new positions and phases: fit `S`, set `v = S'` and
//!   `C -= S'' dt / 2`.

use thiserror::Error;

use crate::diagnostics::{
    check_crossing, equivariance_residual, l2_error, min_spacing, riemann_norm, CrossingEvent,
    Outcome, RunRecord, Snapshot, SnapshotDiagnostics, SpacingSample,
};
use crate::fitting::{fit_at_point, FitError, FitPolicy, FitResult};
use crate::wavestate::{AnalyticState, Potential, StateError, WaveState};

/// Magnitudes above this count as a blow-up.
pub const BLOWUP_LIMIT: f64 = 1e300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid step configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(#[from] StateError),
    #[error("{quantity} fit failed at grid index {index}: {source}")]
    Fit {
        quantity: &'static str,
        index: usize,
        source: FitError,
    },
    #[error("numerical blow-up in {field} at grid index {index}")]
    NumericalBlowup { field: &'static str, index: usize },
    #[error("positions crossed at pair {} during the step", .0.pair_index)]
    CrossedDuringStep(CrossingEvent),
    #[error("a run needs at least one step")]
    NoSteps,
}

#[derive(Debug, Clone)]
pub struct StepConfig {
    pub dt: f64,
    /// Policy for fitting the log-amplitude.
    pub amp_policy: FitPolicy,
    /// Policy for fitting the phase.
    pub phase_policy: FitPolicy,
    pub potential: Potential,
}

impl StepConfig {
    pub fn new(dt: f64, amp_policy: FitPolicy, phase_policy: FitPolicy) -> Self {
        Self {
            dt,
            amp_policy,
            phase_policy,
            potential: Potential::Free,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::InvalidConfig(format!(
                "dt must be positive and finite, got {}",
                self.dt
            )));
        }
        self.amp_policy
            .validate()
            .map_err(|e| DynamicsError::InvalidConfig(format!("amplitude policy: {e}")))?;
        self.phase_policy
            .validate()
            .map_err(|e| DynamicsError::InvalidConfig(format!("phase policy: {e}")))?;
        Ok(())
    }
}

/// `Q(x) = -(C''(x) + C'(x)^2) / 2` from a fit of `C = ln R`.
pub fn quantum_potential_at(c_fit: &FitResult, x: f64) -> f64 {
    let d1 = c_fit.eval(x, 1);
    let d2 = c_fit.eval(x, 2);
    -0.5 * (d2 + d1 * d1)
}

fn check_value(value: f64, field: &'static str, index: usize) -> Result<f64, DynamicsError> {
    if value.is_finite() && value.abs() <= BLOWUP_LIMIT {
        Ok(value)
    } else {
        Err(DynamicsError::NumericalBlowup { field, index })
    }
}

/// Advances `state` by one time step.
pub fn step(state: &WaveState, cfg: &StepConfig) -> Result<WaveState, DynamicsError> {
    let order: Vec<usize> = (0..state.len()).collect();
    step_in_order(state, cfg, &order)
}

/// [`step`] visiting grid points in the given order; `order` must be a
/// permutation of `0..n`.
pub(crate) fn step_in_order(
    state: &WaveState,
    cfg: &StepConfig,
    order: &[usize],
) -> Result<WaveState, DynamicsError> {
    cfg.validate()?;
    state.validate()?;
    let dt = cfg.dt;
    let n = state.len();
    let q_old = state.positions();
    let c_old = state.log_amp();
    let s_old = state.phase();
    let v_old = state.velocity();

    let mut q_new = vec![0.0; n];
    let mut s_new = vec![0.0; n];
    for &j in order {
        let c_fit = fit_at_point(q_old, c_old, j, &cfg.amp_policy).map_err(|source| {
            DynamicsError::Fit {
                quantity: "log-amplitude",
                index: j,
                source,
            }
        })?;
        let quantum = quantum_potential_at(&c_fit, q_old[j]);
        let lagrangian = 0.5 * v_old[j] * v_old[j] - cfg.potential.eval(q_old[j]) - quantum;
        s_new[j] = check_value(s_old[j] + lagrangian * dt, "phase", j)?;
        q_new[j] = check_value(q_old[j] + v_old[j] * dt, "position", j)?;
    }

    let mut v_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for &j in order {
        let s_fit = match fit_at_point(&q_new, &s_new, j, &cfg.phase_policy) {
            Ok(f) => f,
            Err(source) => {
                let moved = WaveState::new(
                    q_new.clone(),
                    c_old.to_vec(),
                    s_new.clone(),
                    v_old.to_vec(),
                    state.time() + dt,
                )?;
                return Err(match check_crossing(&moved) {
                    Some(event) => DynamicsError::CrossedDuringStep(event),
                    None => DynamicsError::Fit {
                        quantity: "phase",
                        index: j,
                        source,
                    },
                });
            }
        };
        v_new[j] = check_value(s_fit.eval(q_new[j], 1), "velocity", j)?;
        c_new[j] = check_value(
            c_old[j] - 0.5 * s_fit.eval(q_new[j], 2) * dt,
            "log-amplitude",
            j,
        )?;
    }

    Ok(WaveState::new(
        q_new,
        c_new,
        s_new,
        v_new,
        state.time() + dt,
    )?)
}

/// Observer invoked after every accepted step.
pub trait Monitor {
    fn on_step(&mut self, step: usize, state: &WaveState);
}

impl<F: FnMut(usize, &WaveState)> Monitor for F {
    fn on_step(&mut self, step: usize, state: &WaveState) {
        self(step, state)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Keep a snapshot every this many steps (the initial and last states
    /// are always kept).
    pub snapshot_every: usize,
    /// Analytic solution for the L2 error series.
    pub reference: Option<AnalyticState>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshot_every: 10,
            reference: None,
        }
    }
}

fn snapshot_diagnostics(
    step: usize,
    state: &WaveState,
    reference: Option<&AnalyticState>,
) -> SnapshotDiagnostics {
    SnapshotDiagnostics {
        step,
        time: state.time(),
        norm: riemann_norm(state),
        equivariance: equivariance_residual(state),
        l2_error: reference.map(|r| l2_error(state, r)),
    }
}

/// Integrates up to `num_steps` steps, stopping early at the first
/// trajectory crossing or step failure.
///
/// Only precondition violations are returned as errors; crossings and
/// failures during the run end up in [`RunRecord::outcome`].
pub fn run(
    initial: &WaveState,
    cfg: &StepConfig,
    num_steps: usize,
    options: &RunOptions,
    monitors: &mut [&mut dyn Monitor],
) -> Result<RunRecord, DynamicsError> {
    if num_steps == 0 {
        return Err(DynamicsError::NoSteps);
    }
    if options.snapshot_every == 0 {
        return Err(DynamicsError::InvalidConfig(
            "snapshot stride must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    initial.validate()?;
    let reference = options.reference.as_ref();

    let mut record = RunRecord {
        snapshots: vec![Snapshot {
            step: 0,
            state: initial.clone(),
        }],
        min_spacing_series: vec![SpacingSample {
            step: 0,
            time: initial.time(),
            min_spacing: min_spacing(initial.positions()).map_or(f64::INFINITY, |m| m.1),
        }],
        snapshot_series: vec![snapshot_diagnostics(0, initial, reference)],
        outcome: Outcome::Completed,
        final_state: initial.clone(),
        steps_taken: 0,
    };

    let mut current = initial.clone();
    for k in 1..=num_steps {
        let next = match step(&current, cfg) {
            Ok(next) => next,
            Err(DynamicsError::CrossedDuringStep(event)) => {
                record.min_spacing_series.push(SpacingSample {
                    step: k,
                    time: event.time,
                    min_spacing: event.spacing,
                });
                record.outcome = Outcome::Crossed {
                    step: k,
                    time: event.time,
                    pair_index: event.pair_index,
                };
                record.steps_taken = k;
                break;
            }
            Err(e) => {
                record.outcome = Outcome::Failed {
                    step: k,
                    reason: e.to_string(),
                };
                break;
            }
        };
        record.steps_taken = k;
        let (_, spacing) = min_spacing(next.positions()).expect("grid has at least two points");
        record.min_spacing_series.push(SpacingSample {
            step: k,
            time: next.time(),
            min_spacing: spacing,
        });
        for m in monitors.iter_mut() {
            m.on_step(k, &next);
        }
        let crossing = check_crossing(&next);
        if k % options.snapshot_every == 0 || k == num_steps || crossing.is_some() {
            record
                .snapshot_series
                .push(snapshot_diagnostics(k, &next, reference));
            record.snapshots.push(Snapshot {
                step: k,
                state: next.clone(),
            });
        }
        current = next;
        if let Some(event) = crossing {
            record.outcome = Outcome::Crossed {
                step: k,
                time: event.time,
                pair_index: event.pair_index,
            };
            break;
        }
    }
    if let Some(last) = record.snapshots.last() {
        if last.step != record.steps_taken && !matches!(record.outcome, Outcome::Crossed { .. }) {
            record.snapshot_series.push(snapshot_diagnostics(
                record.steps_taken,
                &current,
                reference,
            ));
            record.snapshots.push(Snapshot {
                step: record.steps_taken,
                state: current.clone(),
            });
        }
    }
    record.final_state = current;
    Ok(record)
}
