//! Co-moving grid state and the potential hook.
//!
//! The grid stores the wave function in polar form `psi = R exp(iS)` with the
//! amplitude kept as its logarithm `C = ln R`. Units are dimensionless with
//! `m = hbar = 1`.

mod analytic;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use analytic::{AnalyticState, GaussianPacket, NODE_DENSITY_FLOOR};

/// Smallest grid a fit of third-derivative order can run on.
pub const MIN_GRID_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("field lengths differ: positions={positions}, log_amp={log_amp}, phase={phase}, velocity={velocity}")]
    LengthMismatch {
        positions: usize,
        log_amp: usize,
        phase: usize,
        velocity: usize,
    },
    #[error("grid has {0} points, need at least {MIN_GRID_POINTS}")]
    TooFewPoints(usize),
    #[error("non-finite {field} at index {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("positions not strictly increasing at pair {index}")]
    NotIncreasing { index: usize },
    #[error("|psi|^2 = {density:e} below the node floor at index {index} (x = {x})")]
    NodeEvaluation { index: usize, x: f64, density: f64 },
}

/// Snapshot of the co-moving grid at one instant.
///
/// Construction only checks that the four columns line up. Ordering, size
/// and finiteness are checked by [`WaveState::validate`] so that a crossed
/// grid can still be represented and reported.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    positions: Vec<f64>,
    log_amp: Vec<f64>,
    phase: Vec<f64>,
    velocity: Vec<f64>,
    time: f64,
}

impl WaveState {
    pub fn new(
        positions: Vec<f64>,
        log_amp: Vec<f64>,
        phase: Vec<f64>,
        velocity: Vec<f64>,
        time: f64,
    ) -> Result<Self, StateError> {
        let n = positions.len();
        if log_amp.len() != n || phase.len() != n || velocity.len() != n {
            return Err(StateError::LengthMismatch {
                positions: n,
                log_amp: log_amp.len(),
                phase: phase.len(),
                velocity: velocity.len(),
            });
        }
        Ok(Self {
            positions,
            log_amp,
            phase,
            velocity,
            time,
        })
    }

    /// Checks the full set of grid invariants: at least four points, all
    /// values finite and positions strictly increasing.
    pub fn validate(&self) -> Result<(), StateError> {
        if self.len() < MIN_GRID_POINTS {
            return Err(StateError::TooFewPoints(self.len()));
        }
        let columns: [(&'static str, &[f64]); 4] = [
            ("position", &self.positions),
            ("log_amp", &self.log_amp),
            ("phase", &self.phase),
            ("velocity", &self.velocity),
        ];
        for (field, values) in columns {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(StateError::NonFinite { field, index });
            }
        }
        if !self.time.is_finite() {
            return Err(StateError::NonFinite {
                field: "time",
                index: 0,
            });
        }
        if let Some(index) = self.positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(StateError::NotIncreasing { index });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `C_j = ln R(q_j)`.
    pub fn log_amp(&self) -> &[f64] {
        &self.log_amp
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `|psi(q_j)|^2 = exp(2 C_j)`.
    pub fn density(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_amp.iter().map(|c| (2.0 * c).exp())
    }

    /// Returns a copy with `delta` added to every log-amplitude.
    pub fn with_log_amp_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.log_amp.iter_mut().for_each(|c| *c += delta);
        out
    }

    /// Returns a copy with `delta` added to every phase value.
    pub fn with_phase_shift(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.phase.iter_mut().for_each(|s| *s += delta);
        out
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        (
            self.positions,
            self.log_amp,
            self.phase,
            self.velocity,
            self.time,
        )
    }
}

/// External potential `V(q)`.
#[derive(Clone, Default)]
pub enum Potential {
    #[default]
    Free,
    Tabulated(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Potential {
    pub fn tabulated<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Potential::Tabulated(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Tabulated(f) => f(x),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Free => write!(f, "Free"),
            Potential::Tabulated(_) => write!(f, "Tabulated(..)"),
        }
    }
}

/// Builds the grid state at `t = 0` from an analytic initial wave function.
///
/// The phase is taken on the principal branch point by point; no unwrapping
/// is done across neighbouring points.
pub fn init_from_analytic(
    state: &AnalyticState,
    positions: &[f64],
) -> Result<WaveState, StateError> {
    if let Some(index) = positions.iter().position(|x| !x.is_finite()) {
        return Err(StateError::NonFinite {
            field: "position",
            index,
        });
    }
    if let Some(index) = positions.windows(2).position(|w| w[1] <= w[0]) {
        return Err(StateError::NotIncreasing { index });
    }
    let n = positions.len();
    let mut log_amp = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut velocity = Vec::with_capacity(n);
    for (index, &x) in positions.iter().enumerate() {
        let psi = state.psi(0.0, x);
        let density = psi.norm_sqr();
        if !(density >= NODE_DENSITY_FLOOR) {
            return Err(StateError::NodeEvaluation { index, x, density });
        }
        log_amp.push(0.5 * density.ln());
        phase.push(psi.arg());
        let v = state
            .velocity(0.0, x)
            .map_err(|_| StateError::NodeEvaluation { index, x, density })?;
        velocity.push(v);
    }
    WaveState::new(positions.to_vec(), log_amp, phase, velocity, 0.0)
}
