//! Initial grid-point placement.
//!
//! Three layouts: evenly spaced points, an equal-mass quantile grid solving
//! `rho(q_j) (q_{j+1} - q_{j-1}) / 2 = 1 / n`, and random samples from the
//! initial density with a minimum-spacing rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::wavestate::{AnalyticState, MIN_GRID_POINTS, NODE_DENSITY_FLOOR};

/// Quadrature nodes in the CDF table used for sampling.
pub const CDF_TABLE_POINTS: usize = 100_000;
/// Per-point tolerance on the equal-mass balance of a quantile grid.
pub const QUANTILE_RESIDUAL_TOL: f64 = 1e-6;
const MAX_RESAMPLE_ROUNDS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {MIN_GRID_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid grid bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error(
        "grid point {index} at x = {x} hit a node of the density; shift the start hint slightly"
    )]
    NodeEncountered { index: usize, x: f64 },
    #[error("grid initialization failed: {0}")]
    InitFailure(String),
}

/// A one-dimensional probability density with a finite numerical support.
pub trait Density {
    fn density(&self, x: f64) -> f64;
    /// Interval carrying essentially all of the mass.
    fn support(&self) -> (f64, f64);
}

/// The `t = 0` density of an analytic state.
impl Density for AnalyticState {
    fn density(&self, x: f64) -> f64 {
        AnalyticState::density(self, 0.0, x)
    }

    fn support(&self) -> (f64, f64) {
        self.initial_support()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `start_hint = None` starts at the density maximum.
    Quantile {
        start_hint: Option<f64>,
    },
    RandomSampled {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    pub count: usize,
    /// Pairs must satisfy `spacing / |dv| > ratio * dt`.
    pub min_spacing_time_ratio: f64,
}

impl GridSpec {
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Self {
        Self {
            kind: GridKind::Uniform { lo, hi },
            count,
            min_spacing_time_ratio: 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.count < MIN_GRID_POINTS {
            return Err(GridError::TooFewPoints(self.count));
        }
        if let GridKind::Uniform { lo, hi } = self.kind {
            if !(hi > lo && lo.is_finite() && hi.is_finite()) {
                return Err(GridError::InvalidBounds { lo, hi });
            }
        }
        Ok(())
    }

    /// Positions for `state`; `dt` only matters for random sampling.
    pub fn build(&self, state: &AnalyticState, dt: f64) -> Result<Vec<f64>, GridError> {
        self.validate()?;
        match self.kind {
            GridKind::Uniform { lo, hi } => Ok(uniform_grid(lo, hi, self.count)),
            GridKind::Quantile { start_hint } => {
                let hint =
                    start_hint.unwrap_or_else(|| CdfTable::new(state, CDF_TABLE_POINTS).mode());
                quantile_grid(state, self.count, hint)
            }
            GridKind::RandomSampled { seed } => {
                random_grid(state, self.count, seed, dt, self.min_spacing_time_ratio)
            }
        }
    }
}

/// `count` evenly spaced points from `lo` to `hi`, both included.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let last = (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i == count - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * (i as f64 / last)
                    }
                })
                .collect()
        }
    }
}

/// Trapezoid-rule cumulative distribution on a fine uniform table,
/// normalized to total mass 1.
#[derive(Debug, Clone)]
pub struct CdfTable {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    mass: f64,
    mode: f64,
}

impl CdfTable {
    pub fn new<D: Density + ?Sized>(density: &D, points: usize) -> Self {
        let (lo, hi) = density.support();
        let xs = uniform_grid(lo, hi, points.max(2));
        let rho: Vec<f64> = xs.iter().map(|&x| density.density(x)).collect();
        let mut cdf = Vec::with_capacity(xs.len());
        cdf.push(0.0);
        for i in 1..xs.len() {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * (rho[i] + rho[i - 1]) * (xs[i] - xs[i - 1]));
        }
        let mass = *cdf.last().unwrap();
        cdf.iter_mut().for_each(|c| *c /= mass);
        let mode = rho
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| xs[i])
            .unwrap();
        Self {
            xs,
            cdf,
            mass,
            mode,
        }
    }

    /// Total unnormalized mass on the support.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Table node with the largest density.
    pub fn mode(&self) -> f64 {
        self.mode
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let i = self.xs.partition_point(|&t| t <= x) - 1;
        let f = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Inverse CDF by linear interpolation, `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.cdf.len();
        let u = u.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.xs[i - 1] + f * (self.xs[i] - self.xs[i - 1])
    }
}

/// Equal-mass grid from the recurrence `q_{j+1} = q_{j-1} + 2 / (n rho(q_j))`.
///
/// The point at `start_hint` and its right neighbour
/// `start_hint + 1 / (n rho(start_hint))` seed the recurrence, which is
/// marched outward in both directions. The hint's index is taken from the
/// mass to its left, and the hint is then nudged until the mass left of the
/// first point equals the mass right of the last point.
///
/// `density` need not be normalized; it is rescaled to unit mass first.
pub fn quantile_grid<D: Density + ?Sized>(
    density: &D,
    count: usize,
    start_hint: f64,
) -> Result<Vec<f64>, GridError> {
    if count < MIN_GRID_POINTS {
        return Err(GridError::TooFewPoints(count));
    }
    let table = CdfTable::new(density, CDF_TABLE_POINTS);
    // the balance targets 1/n of a unit mass
    let scaled = Scaled {
        inner: density,
        factor: 1.0 / table.mass(),
    };
    let density = &scaled;
    let anchor = ((count as f64 * table.cdf(start_hint) - 0.5)
        .round()
        .max(0.0) as usize)
        .min(count - 1);
    let mut grid = march_equal_mass(density, count, start_hint, anchor)?;

    let imbalance = |q: &[f64]| table.cdf(q[0]) - (1.0 - table.cdf(q[count - 1]));
    let g0 = imbalance(&grid);
    if g0 != 0.0 {
        let step = 1.0 / (count as f64 * density.density(start_hint));
        // find a bracket on the side the imbalance points to
        let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
        let mut bracket = None;
        let mut width = step / 64.0;
        for _ in 0..16 {
            let probe = start_hint + dir * width;
            if let Ok(q) = march_equal_mass(density, count, probe, anchor) {
                if imbalance(&q).signum() != g0.signum() {
                    bracket = Some((start_hint, probe));
                    break;
                }
            }
            width *= 2.0;
        }
        if let Some((mut a, mut b)) = bracket {
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if mid == a || mid == b {
                    break;
                }
                let q = march_equal_mass(density, count, mid, anchor)?;
                let g = imbalance(&q);
                grid = q;
                if g == 0.0 {
                    break;
                }
                if g.signum() == g0.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
        }
    }

    let residual = equal_mass_residual(density, &grid);
    if !(residual <= QUANTILE_RESIDUAL_TOL) {
        return Err(GridError::InitFailure(format!(
            "equal-mass residual {residual:e} exceeds {QUANTILE_RESIDUAL_TOL:e}"
        )));
    }
    Ok(grid)
}

struct Scaled<'a, D: ?Sized> {
    inner: &'a D,
    factor: f64,
}

impl<D: Density + ?Sized> Density for Scaled<'_, D> {
    fn density(&self, x: f64) -> f64 {
        self.factor * self.inner.density(x)
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }
}

/// `max_j |rho(q_j) (q_{j+1} - q_{j-1}) / 2 - 1 / n|` over interior points,
/// with `rho` taken as given (normalize it first).
pub fn equal_mass_residual<D: Density + ?Sized>(density: &D, q: &[f64]) -> f64 {
    let target = 1.0 / q.len() as f64;
    (1..q.len().saturating_sub(1))
        .map(|j| (density.density(q[j]) * (q[j + 1] - q[j - 1]) / 2.0 - target).abs())
        .fold(0.0, f64::max)
}

fn march_equal_mass<D: Density + ?Sized>(
    density: &D,
    n: usize,
    hint: f64,
    anchor: usize,
) -> Result<Vec<f64>, GridError> {
    let nf = n as f64;
    let rho_at = |index: usize, x: f64| -> Result<f64, GridError> {
        let rho = density.density(x);
        if !x.is_finite() {
            return Err(GridError::InitFailure(format!(
                "recurrence diverged at point {index}"
            )));
        }
        if !(rho >= NODE_DENSITY_FLOOR) {
            return Err(GridError::NodeEncountered { index, x });
        }
        Ok(rho)
    };
    let mut q = vec![0.0; n];
    q[anchor] = hint;
    let rho0 = rho_at(anchor, hint)?;
    if anchor + 1 < n {
        q[anchor + 1] = hint + 1.0 / (nf * rho0);
        for j in (anchor + 1)..(n - 1) {
            q[j + 1] = q[j - 1] + 2.0 / (nf * rho_at(j, q[j])?);
        }
        for j in (1..=anchor).rev() {
            q[j - 1] = q[j + 1] - 2.0 / (nf * rho_at(j, q[j])?);
        }
    } else {
        q[anchor - 1] = hint - 1.0 / (nf * rho0);
        for j in (1..anchor).rev() {
            q[j - 1] = q[j + 1] - 2.0 / (nf * rho_at(j, q[j])?);
        }
    }
    for (index, &x) in q.iter().enumerate() {
        rho_at(index, x)?;
    }
    if let Some(j) = q.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(GridError::InitFailure(format!(
            "recurrence lost ordering at pair {j}"
        )));
    }
    Ok(q)
}

/// Sorted samples from the initial density with close pairs thinned.
///
/// A neighbouring pair whose spacing divided by the magnitude of their
/// initial relative velocity is at most `ratio * dt` loses one point, which
/// is resampled. Pairs with zero relative velocity are always accepted.
pub fn random_grid(
    state: &AnalyticState,
    count: usize,
    seed: u64,
    dt: f64,
    ratio: f64,
) -> Result<Vec<f64>, GridError> {
    if count < MIN_GRID_POINTS {
        return Err(GridError::TooFewPoints(count));
    }
    let table = CdfTable::new(state, CDF_TABLE_POINTS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<(f64, f64), GridError> {
        let x = table.quantile(rng.gen::<f64>());
        let v = state
            .velocity(0.0, x)
            .map_err(|_| GridError::NodeEncountered { index: 0, x })?;
        Ok((x, v))
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        points.push(draw(&mut rng)?);
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let threshold = ratio * dt;
    for _ in 0..MAX_RESAMPLE_ROUNDS {
        let violation = points.windows(2).position(|w| {
            let spacing = w[1].0 - w[0].0;
            let dv = (w[1].1 - w[0].1).abs();
            spacing <= 0.0 || (dv > 0.0 && spacing / dv <= threshold)
        });
        match violation {
            None => return Ok(points.into_iter().map(|p| p.0).collect()),
            Some(j) => {
                points.remove(j + 1);
                let fresh = draw(&mut rng)?;
                let at = points.partition_point(|p| p.0 < fresh.0);
                points.insert(at, fresh);
            }
        }
    }
    Err(GridError::InitFailure(format!(
        "spacing rule not satisfied after {MAX_RESAMPLE_ROUNDS} resamples"
    )))
}
