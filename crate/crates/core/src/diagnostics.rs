//! Quality measures on grid snapshots and the per-run record.

use std::fmt;

use num_complex::Complex64;

use crate::wavestate::{AnalyticState, WaveState};

/// Two neighbouring grid points that have met or swapped order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    /// `q[pair_index + 1] - q[pair_index] <= 0`.
    pub pair_index: usize,
    pub spacing: f64,
    pub time: f64,
}

/// Smallest adjacent spacing and where it occurs.
pub fn min_spacing(positions: &[f64]) -> Option<(usize, f64)> {
    positions
        .windows(2)
        .map(|w| w[1] - w[0])
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Reports a crossing when the smallest adjacent spacing is `<= 0`.
pub fn check_crossing(state: &WaveState) -> Option<CrossingEvent> {
    match min_spacing(state.positions()) {
        Some((pair_index, spacing)) if !(spacing > 0.0) => Some(CrossingEvent {
            pair_index,
            spacing,
            time: state.time(),
        }),
        _ => None,
    }
}

/// Discrete L2 distance to the analytic solution at the state's time.
///
/// Right-endpoint rule: `sqrt(sum_j (q_{j+1} - q_j) |psi(q_{j+1}) - R_{j+1} e^{i S_{j+1}}|^2)`,
/// so the first point never contributes.
pub fn l2_error(state: &WaveState, reference: &AnalyticState) -> f64 {
    let q = state.positions();
    let t = state.time();
    let sum: f64 = (1..q.len())
        .map(|j| {
            let simulated = Complex64::from_polar(state.log_amp()[j].exp(), state.phase()[j]);
            let exact = reference.psi(t, q[j]);
            (q[j] - q[j - 1]) * (exact - simulated).norm_sqr()
        })
        .sum();
    sum.sqrt()
}

/// `sum_j exp(2 C_j) w_j` with `w_j = (q_{j+1} - q_{j-1}) / 2` and half
/// intervals at the two ends.
pub fn riemann_norm(state: &WaveState) -> f64 {
    let q = state.positions();
    let n = q.len();
    if n < 2 {
        return 0.0;
    }
    state
        .density()
        .enumerate()
        .map(|(j, rho)| {
            let left = if j > 0 { q[j - 1] } else { q[0] };
            let right = if j + 1 < n { q[j + 1] } else { q[n - 1] };
            rho * (right - left) / 2.0
        })
        .sum()
}

/// `max_j |exp(2 C_j) (q_{j+1} - q_{j-1}) / 2 - 1/n|` over interior points:
/// how far the grid density has drifted from `|psi|^2`.
pub fn equivariance_residual(state: &WaveState) -> f64 {
    let q = state.positions();
    let n = q.len();
    let target = 1.0 / n as f64;
    let c = state.log_amp();
    (1..n.saturating_sub(1))
        .map(|j| ((2.0 * c[j]).exp() * (q[j + 1] - q[j - 1]) / 2.0 - target).abs())
        .fold(0.0, f64::max)
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    Crossed {
        step: usize,
        time: f64,
        pair_index: usize,
    },
    Failed {
        step: usize,
        reason: String,
    },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::Crossed { .. } => "crossed",
            Outcome::Failed { .. } => "failed",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Completed => write!(f, "completed"),
            Outcome::Crossed {
                step,
                time,
                pair_index,
            } => {
                write!(f, "trajectory crossing at step {step} (t = {time}) between points {pair_index} and {}", pair_index + 1)
            }
            Outcome::Failed { step, reason } => write!(f, "failed at step {step}: {reason}"),
        }
    }
}

/// A recorded snapshot together with its step number.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: WaveState,
}

/// Diagnostic values computed at each snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotDiagnostics {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub equivariance: f64,
    /// Only present when the run was given an analytic reference.
    pub l2_error: Option<f64>,
}

/// One entry per completed step (plus the initial state at step 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingSample {
    pub step: usize,
    pub time: f64,
    pub min_spacing: f64,
}

/// History of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub snapshots: Vec<Snapshot>,
    pub min_spacing_series: Vec<SpacingSample>,
    pub snapshot_series: Vec<SnapshotDiagnostics>,
    pub outcome: Outcome,
    /// Last state reached, crossed or not.
    pub final_state: WaveState,
    pub steps_taken: usize,
}

impl RunRecord {
    pub fn l2_error_series(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.snapshot_series
            .iter()
            .filter_map(|d| d.l2_error.map(|e| (d.time, e)))
    }

    pub fn norm_series(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.snapshot_series.iter().map(|d| (d.time, d.norm))
    }

    pub fn snapshot_at_step(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}
