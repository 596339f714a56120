//! Bohmian trajectory-grid simulation of the one-dimensional Schrödinger
//! equation in hydrodynamic form.
//!
//! Grid points are moved along their own Bohmian trajectories while the
//! log-amplitude and phase carried by each point are integrated with
//! derivatives taken from local polynomial fits. The fitting estimator is
//! interchangeable between exact interpolation and least squares.

// `!(x > 0.0)` style checks are meant to catch NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod fitting;
pub mod gridinit;
pub mod wavestate;

pub use diagnostics::{
    check_crossing, equivariance_residual, l2_error, riemann_norm, CrossingEvent, Outcome,
    RunRecord,
};
pub use dynamics::{run, step, RunOptions, StepConfig};
pub use fitting::{
    fit, fit_at_point, select_stencil, Estimator, FitPolicy, FitResult, Stencil, WeightKernel,
};
pub use gridinit::{quantile_grid, random_grid, uniform_grid, GridKind, GridSpec};
pub use wavestate::{init_from_analytic, AnalyticState, GaussianPacket, Potential, WaveState};
