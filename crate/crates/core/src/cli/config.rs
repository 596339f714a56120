//! Run configuration files.
//!
//! Configurations are TOML documents. Every table rejects unknown keys, and
//! validation errors name the offending field with its dotted path.
//!
//! ```toml
//! [[packets]]            # one table per Gaussian component
//! weight_re = 0.7071067811865476
//! weight_im = 0.0        # optional
//! center = 3.0
//! sigma = 4.0
//!
//! [grid]
//! kind = "uniform"       # uniform | quantile | random
//! count = 51
//! lo = -8.0              # uniform only
//! hi = 8.0               # uniform only
//! start_hint = 2.5       # quantile, optional (defaults to the density maximum)
//! seed = 1               # random, optional (default 0)
//! min_spacing_time_ratio = 10.0
//!
//! [step]
//! dt = 0.01
//! num_steps = 5000
//!
//! [amplitude_fit]        # and [phase_fit]
//! estimator = "exact"    # exact | lsq
//! basis_count = 7
//! interior_half_width = 3
//! boundary_degree = 2
//! boundary_extension = 7 # optional, defaults to round(count / 7)
//! weight_kernel = "uniform"  # uniform | gaussian
//! kernel_bandwidth = 1.0     # gaussian only
//!
//! [output]               # every key optional
//! directory = "out"
//! snapshot_every = 10
//! trajectories = true
//! fields = true
//! errors = true
//! field_times = [3.8, 15.0]
//! field_samples = 8
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::StepConfig;
use crate::fitting::{default_boundary_extension, Estimator, FitPolicy, WeightKernel};
use crate::gridinit::{GridKind, GridSpec};
use crate::wavestate::{AnalyticState, GaussianPacket, MIN_GRID_POINTS};

const BUNDLED: [(&str, &str); 2] = [
    (
        "paper_polyfit",
        include_str!("../../configs/paper_polyfit.toml"),
    ),
    ("paper_lsq", include_str!("../../configs/paper_lsq.toml")),
];

/// Names accepted in place of a config path.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub packets: Vec<PacketConfig>,
    pub grid: GridConfig,
    pub step: StepSection,
    pub amplitude_fit: PolicyConfig,
    pub phase_fit: PolicyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub weight_re: f64,
    #[serde(default)]
    pub weight_im: f64,
    pub center: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindName {
    Uniform,
    Quantile,
    Random,
}

impl fmt::Display for GridKindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridKindName::Uniform => "uniform",
            GridKindName::Quantile => "quantile",
            GridKindName::Random => "random",
        })
    }
}

fn default_ratio() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub kind: GridKindName,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_hint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_ratio")]
    pub min_spacing_time_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSection {
    pub dt: f64,
    pub num_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorName {
    Exact,
    Lsq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    #[default]
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub estimator: EstimatorName,
    pub basis_count: usize,
    pub interior_half_width: usize,
    pub boundary_degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_extension: Option<usize>,
    #[serde(default)]
    pub weight_kernel: KernelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_bandwidth: Option<f64>,
}

impl PolicyConfig {
    fn to_policy(&self, grid_size: usize) -> FitPolicy {
        FitPolicy {
            estimator: match self.estimator {
                EstimatorName::Exact => Estimator::ExactPolynomial,
                EstimatorName::Lsq => Estimator::LeastSquares,
            },
            basis_count: self.basis_count,
            interior_half_width: self.interior_half_width,
            boundary_degree: self.boundary_degree,
            boundary_extension: self
                .boundary_extension
                .unwrap_or_else(|| default_boundary_extension(grid_size)),
            weight_kernel: match self.weight_kernel {
                KernelName::Uniform => WeightKernel::Uniform,
                KernelName::Gaussian => WeightKernel::Gaussian {
                    bandwidth: self.kernel_bandwidth.unwrap_or(f64::NAN),
                },
            },
        }
    }

    /// Switch estimators while keeping the basis. Exact fitting narrows the
    /// window to `basis_count` points; least squares widens a window that is
    /// exactly `basis_count` points by one point on each side.
    fn switch_estimator(&mut self, method: EstimatorName) {
        self.estimator = method;
        match method {
            EstimatorName::Exact => {
                self.interior_half_width = self.basis_count.saturating_sub(1) / 2
            }
            EstimatorName::Lsq => {
                if 2 * self.interior_half_width < self.basis_count {
                    self.interior_half_width = self.basis_count / 2 + 1;
                }
            }
        }
    }

    fn validate(&self, section: &str, grid_size: usize) -> Result<(), ConfigError> {
        if self.weight_kernel == KernelName::Gaussian {
            match self.kernel_bandwidth {
                Some(b) if b > 0.0 && b.is_finite() => {}
                _ => {
                    return Err(invalid(
                        format!("{section}.kernel_bandwidth"),
                        "a gaussian kernel needs a positive finite bandwidth",
                    ))
                }
            }
        }
        if self.basis_count < 2 {
            return Err(invalid(
                format!("{section}.basis_count"),
                "must be at least 2",
            ));
        }
        if self.interior_half_width < 1 {
            return Err(invalid(
                format!("{section}.interior_half_width"),
                "must be at least 1",
            ));
        }
        let window = 2 * self.interior_half_width + 1;
        match self.estimator {
            EstimatorName::Exact if window != self.basis_count => {
                return Err(invalid(
                    format!("{section}.interior_half_width"),
                    format!("exact fitting needs 2 * half_width + 1 == basis_count, got window {window} for basis_count {}", self.basis_count),
                ))
            }
            EstimatorName::Lsq if window < self.basis_count => {
                return Err(invalid(
                    format!("{section}.interior_half_width"),
                    format!("least squares needs 2 * half_width + 1 >= basis_count, got window {window} for basis_count {}", self.basis_count),
                ))
            }
            _ => {}
        }
        if self.boundary_degree + 1 > self.basis_count {
            return Err(invalid(
                format!("{section}.boundary_degree"),
                format!(
                    "must not exceed the interior degree {}",
                    self.basis_count - 1
                ),
            ));
        }
        let policy = self.to_policy(grid_size);
        if policy.boundary_window() > grid_size {
            return Err(invalid(
                "grid.count",
                format!(
                    "{section} needs an edge window of {} points but the grid has {grid_size}",
                    policy.boundary_window()
                ),
            ));
        }
        policy
            .validate()
            .map_err(|e| invalid(section.to_string(), e.to_string()))
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_stride() -> usize {
    10
}

fn yes() -> bool {
    true
}

fn default_field_samples() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_stride")]
    pub snapshot_every: usize,
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default = "yes")]
    pub fields: bool,
    #[serde(default = "yes")]
    pub errors: bool,
    /// Snapshot times at which `simulate` writes fitted fields.
    #[serde(default)]
    pub field_times: Vec<f64>,
    /// Samples per half-interval neighbourhood in a field file.
    #[serde(default = "default_field_samples")]
    pub field_samples: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            snapshot_every: default_stride(),
            trajectories: true,
            fields: true,
            errors: true,
            field_times: Vec::new(),
            field_samples: default_field_samples(),
        }
    }
}

/// Reads a config file, or a bundled config when `path` names one and no
/// such file exists.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    if !path.exists() {
        if let Some(text) = path.to_str().and_then(bundled_config) {
            return parse_config(text, &format!("bundled `{}`", path.display()));
        }
    }
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates config text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    cfg.resolve_defaults();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Write derived defaults back into the config so that a saved copy
    /// reproduces the run without knowing the defaults.
    fn resolve_defaults(&mut self) {
        let n = self.grid.count;
        for p in [&mut self.amplitude_fit, &mut self.phase_fit] {
            p.boundary_extension
                .get_or_insert_with(|| default_boundary_extension(n));
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.packets.is_empty() {
            return Err(invalid("packets", "at least one packet is required"));
        }
        for (i, p) in self.packets.iter().enumerate() {
            if !(p.sigma > 0.0 && p.sigma.is_finite()) {
                return Err(invalid(
                    format!("packets[{i}].sigma"),
                    format!("must be positive, got {}", p.sigma),
                ));
            }
            for (name, v) in [
                ("weight_re", p.weight_re),
                ("weight_im", p.weight_im),
                ("center", p.center),
            ] {
                if !v.is_finite() {
                    return Err(invalid(format!("packets[{i}].{name}"), "must be finite"));
                }
            }
            if p.weight_re == 0.0 && p.weight_im == 0.0 {
                return Err(invalid(
                    format!("packets[{i}].weight_re"),
                    "packet weight is zero",
                ));
            }
        }

        let g = &self.grid;
        if g.count < MIN_GRID_POINTS {
            return Err(invalid(
                "grid.count",
                format!("must be at least {MIN_GRID_POINTS}, got {}", g.count),
            ));
        }
        if !(g.min_spacing_time_ratio > 0.0 && g.min_spacing_time_ratio.is_finite()) {
            return Err(invalid("grid.min_spacing_time_ratio", "must be positive"));
        }
        if g.kind == GridKindName::Uniform {
            let lo =
                g.lo.ok_or_else(|| invalid("grid.lo", "required for a uniform grid"))?;
            let hi =
                g.hi.ok_or_else(|| invalid("grid.hi", "required for a uniform grid"))?;
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(invalid("grid.lo", "bounds must be finite"));
            }
            if !(hi > lo) {
                return Err(invalid(
                    "grid.hi",
                    format!("must exceed grid.lo = {lo}, got {hi}"),
                ));
            }
        }
        if let Some(h) = g.start_hint {
            if !h.is_finite() {
                return Err(invalid("grid.start_hint", "must be finite"));
            }
        }

        if !(self.step.dt > 0.0 && self.step.dt.is_finite()) {
            return Err(invalid(
                "step.dt",
                format!("must be positive and finite, got {}", self.step.dt),
            ));
        }
        if self.step.num_steps < 1 {
            return Err(invalid("step.num_steps", "must be at least 1"));
        }
        self.amplitude_fit.validate("amplitude_fit", g.count)?;
        self.phase_fit.validate("phase_fit", g.count)?;

        let o = &self.output;
        if o.snapshot_every < 1 {
            return Err(invalid("output.snapshot_every", "must be at least 1"));
        }
        if o.field_samples < 1 {
            return Err(invalid("output.field_samples", "must be at least 1"));
        }
        if let Some(t) = o
            .field_times
            .iter()
            .find(|t| !(t.is_finite() && **t >= 0.0))
        {
            return Err(invalid(
                "output.field_times",
                format!("times must be finite and non-negative, got {t}"),
            ));
        }
        Ok(())
    }

    /// Replace both estimators, adjusting the interior windows to match.
    pub fn override_method(&mut self, method: EstimatorName) {
        self.amplitude_fit.switch_estimator(method);
        self.phase_fit.switch_estimator(method);
    }

    pub fn analytic_state(&self) -> AnalyticState {
        let packets = self
            .packets
            .iter()
            .map(|p| GaussianPacket {
                weight: Complex64::new(p.weight_re, p.weight_im),
                center: p.center,
                sigma: p.sigma,
            })
            .collect();
        AnalyticState::new(packets).expect("packets validated")
    }

    /// Grid layout, optionally with a different kind than the file names.
    pub fn grid_spec(&self, kind: Option<GridKindName>) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        let kind = match kind.unwrap_or(g.kind) {
            GridKindName::Uniform => GridKind::Uniform {
                lo: g
                    .lo
                    .ok_or_else(|| invalid("grid.lo", "required for a uniform grid"))?,
                hi: g
                    .hi
                    .ok_or_else(|| invalid("grid.hi", "required for a uniform grid"))?,
            },
            GridKindName::Quantile => GridKind::Quantile {
                start_hint: g.start_hint,
            },
            GridKindName::Random => GridKind::RandomSampled {
                seed: g.seed.unwrap_or(0),
            },
        };
        Ok(GridSpec {
            kind,
            count: g.count,
            min_spacing_time_ratio: g.min_spacing_time_ratio,
        })
    }

    pub fn amp_policy(&self) -> FitPolicy {
        self.amplitude_fit.to_policy(self.grid.count)
    }

    pub fn phase_policy(&self) -> FitPolicy {
        self.phase_fit.to_policy(self.grid.count)
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig::new(self.step.dt, self.amp_policy(), self.phase_policy())
    }
}
