//! Local polynomial regression on a window of grid points.
//!
//! A fit solves `y = X a + delta` for the monomial design matrix
//! `X_ij = (x_i - center)^j`. With `n = degree + 1` points the residual is
//! zero (interpolation); with more points the weighted squared residual is
//! minimized. Both cases go through the same Householder QR solve, so the
//! exact estimator is the `n = m` special case of least squares.

use thiserror::Error;

/// Fits whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("grid of {grid_size} points cannot host a boundary window of {required}")]
    GridTooSmall { grid_size: usize, required: usize },
    #[error("center index {index} outside grid of {grid_size} points")]
    IndexOutOfRange { index: usize, grid_size: usize },
    #[error("duplicate abscissa {x} in stencil")]
    DegenerateStencil { x: f64 },
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("ill-conditioned fit (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("invalid fit policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// Interpolation through exactly `basis_count` points.
    ExactPolynomial,
    /// Weighted least squares over a window wider than `basis_count`.
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKernel {
    Uniform,
    /// `w = exp(-((x_i - x_c) / bandwidth)^2 / 2)`.
    Gaussian {
        bandwidth: f64,
    },
}

impl WeightKernel {
    fn weight(&self, x: f64, center: f64) -> f64 {
        match *self {
            WeightKernel::Uniform => 1.0,
            WeightKernel::Gaussian { bandwidth } => {
                let u = (x - center) / bandwidth;
                (-0.5 * u * u).exp()
            }
        }
    }
}

/// How a derivative estimate is built at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPolicy {
    pub estimator: Estimator,
    /// Number of monomials `m`; the interior degree is `m - 1`.
    pub basis_count: usize,
    /// Interior windows hold `2 s + 1` points.
    pub interior_half_width: usize,
    pub boundary_degree: usize,
    /// Extra points appended to a window pinned at the grid edge.
    pub boundary_extension: usize,
    pub weight_kernel: WeightKernel,
}

impl FitPolicy {
    /// Seven-point interpolation with degree 6 in the interior and a wide
    /// quadratic least-squares fit at the edges.
    pub fn paper_polyfit(grid_size: usize) -> Self {
        Self {
            estimator: Estimator::ExactPolynomial,
            basis_count: 7,
            interior_half_width: 3,
            boundary_degree: 2,
            boundary_extension: default_boundary_extension(grid_size),
            weight_kernel: WeightKernel::Uniform,
        }
    }

    /// Same as [`FitPolicy::paper_polyfit`] but with nine-point least-squares
    /// windows in the interior.
    pub fn paper_least_squares(grid_size: usize) -> Self {
        Self {
            estimator: Estimator::LeastSquares,
            interior_half_width: 4,
            ..Self::paper_polyfit(grid_size)
        }
    }

    pub fn interior_window(&self) -> usize {
        2 * self.interior_half_width + 1
    }

    pub fn boundary_window(&self) -> usize {
        self.interior_window() + self.boundary_extension
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.basis_count < 2 {
            return Err(FitError::InvalidPolicy(format!(
                "basis_count must be at least 2, got {}",
                self.basis_count
            )));
        }
        if self.interior_half_width < 1 {
            return Err(FitError::InvalidPolicy(
                "interior_half_width must be at least 1".into(),
            ));
        }
        let window = self.interior_window();
        match self.estimator {
            Estimator::ExactPolynomial if window != self.basis_count => {
                return Err(FitError::InvalidPolicy(format!(
                    "exact polynomial fitting needs window {window} == basis_count {}",
                    self.basis_count
                )))
            }
            Estimator::LeastSquares if window < self.basis_count => {
                return Err(FitError::InvalidPolicy(format!(
                    "least squares needs window {window} >= basis_count {}",
                    self.basis_count
                )))
            }
            _ => {}
        }
        if self.boundary_degree > self.basis_count - 1 {
            return Err(FitError::InvalidPolicy(format!(
                "boundary_degree {} exceeds interior degree {}",
                self.boundary_degree,
                self.basis_count - 1
            )));
        }
        if let WeightKernel::Gaussian { bandwidth } = self.weight_kernel {
            if !(bandwidth > 0.0 && bandwidth.is_finite()) {
                return Err(FitError::InvalidPolicy(format!(
                    "gaussian bandwidth must be positive, got {bandwidth}"
                )));
            }
        }
        Ok(())
    }
}

/// `round(n / 7)`, the edge-window widening used by the reference runs.
pub fn default_boundary_extension(grid_size: usize) -> usize {
    (grid_size as f64 / 7.0).round() as usize
}

/// Inclusive index window plus the polynomial degree fitted on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stencil {
    pub first: usize,
    pub last: usize,
    pub degree: usize,
}

impl Stencil {
    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

/// Picks the window for the fit at `center_index`.
///
/// A centred window that would spill over an edge is pinned to that edge,
/// widened by `boundary_extension` points and fitted with
/// `boundary_degree`. The switch is discontinuous.
pub fn select_stencil(
    center_index: usize,
    grid_size: usize,
    policy: &FitPolicy,
) -> Result<Stencil, FitError> {
    if center_index >= grid_size {
        return Err(FitError::IndexOutOfRange {
            index: center_index,
            grid_size,
        });
    }
    let required = policy.boundary_window();
    if grid_size < required {
        return Err(FitError::GridTooSmall {
            grid_size,
            required,
        });
    }
    let s = policy.interior_half_width;
    let stencil = if center_index < s {
        Stencil {
            first: 0,
            last: required - 1,
            degree: policy.boundary_degree,
        }
    } else if center_index + s > grid_size - 1 {
        Stencil {
            first: grid_size - required,
            last: grid_size - 1,
            degree: policy.boundary_degree,
        }
    } else {
        Stencil {
            first: center_index - s,
            last: center_index + s,
            degree: policy.basis_count - 1,
        }
    };
    Ok(stencil)
}

/// Polynomial in the shifted variable `x - center`; `coefficients[j]`
/// multiplies `(x - center)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    pub center: f64,
}

impl FitResult {
    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    /// `order`-th derivative of the polynomial at `x`.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        let u = x - self.center;
        let a = &self.coefficients;
        if order >= a.len() {
            return 0.0;
        }
        // Horner on the differentiated coefficients a_j * j! / (j - order)!
        let mut acc = 0.0;
        for j in (order..a.len()).rev() {
            let falling: f64 = ((j - order + 1)..=j).map(|k| k as f64).product();
            acc = acc * u + a[j] * falling;
        }
        acc
    }
}

pub fn eval_fit(f: &FitResult, x: f64, derivative_order: usize) -> f64 {
    f.eval(x, derivative_order)
}

/// Weighted least-squares polynomial of the given degree in `x - center`.
pub fn fit(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    weights: &[f64],
    center: f64,
) -> Result<FitResult, FitError> {
    let n = xs.len();
    let m = degree + 1;
    if ys.len() != n || weights.len() != n {
        return Err(FitError::InvalidInput(format!(
            "length mismatch: xs={n}, ys={}, weights={}",
            ys.len(),
            weights.len()
        )));
    }
    if n < m {
        return Err(FitError::InvalidInput(format!(
            "{n} points cannot determine a degree-{degree} polynomial"
        )));
    }
    if !center.is_finite() || xs.iter().chain(ys).chain(weights).any(|v| !v.is_finite()) {
        return Err(FitError::InvalidInput("non-finite value".into()));
    }
    if let Some(w) = weights.iter().find(|&&w| w <= 0.0) {
        return Err(FitError::InvalidInput(format!(
            "weight {w} is not positive"
        )));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(pair) = sorted.windows(2).find(|p| p[0] == p[1]) {
        return Err(FitError::DegenerateStencil { x: pair[0] });
    }

    // Scale the shifted abscissae into [-1, 1] so the columns are balanced.
    let scale = xs.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };

    let mut a = vec![0.0; n * m];
    let mut b = vec![0.0; n];
    for i in 0..n {
        let sw = weights[i].sqrt();
        let u = (xs[i] - center) / scale;
        let mut p = sw;
        for j in 0..m {
            a[i * m + j] = p;
            p *= u;
        }
        b[i] = sw * ys[i];
    }
    let (scaled, condition) = householder_lstsq(&mut a, &mut b, n, m);
    if !(condition <= MAX_CONDITION) {
        return Err(FitError::IllConditioned { condition });
    }
    let mut coefficients = scaled;
    let mut s = 1.0;
    for c in coefficients.iter_mut() {
        *c /= s;
        s *= scale;
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(FitError::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    Ok(FitResult {
        coefficients,
        center,
    })
}

/// Fit at one grid point following `policy`, centred on that point.
pub fn fit_at_point(
    grid_xs: &[f64],
    grid_ys: &[f64],
    center_index: usize,
    policy: &FitPolicy,
) -> Result<FitResult, FitError> {
    if grid_xs.len() != grid_ys.len() {
        return Err(FitError::InvalidInput(format!(
            "grid length mismatch: {} vs {}",
            grid_xs.len(),
            grid_ys.len()
        )));
    }
    let stencil = select_stencil(center_index, grid_xs.len(), policy)?;
    let xs = &grid_xs[stencil.range()];
    let ys = &grid_ys[stencil.range()];
    let center = grid_xs[center_index];
    let weights: Vec<f64> = xs
        .iter()
        .map(|&x| policy.weight_kernel.weight(x, center))
        .collect();
    fit(xs, ys, stencil.degree, &weights, center)
}

/// Solves `min ||A x - b||` for a row-major `n x m` matrix, `n >= m`.
/// Returns the solution and the 1-norm condition number of `R`.
/// `a` and `b` are overwritten.
fn householder_lstsq(a: &mut [f64], b: &mut [f64], n: usize, m: usize) -> (Vec<f64>, f64) {
    let mut diag = vec![0.0; m];
    for k in 0..m {
        let norm = (k..n).map(|i| a[i * m + k].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (vec![f64::NAN; m], f64::INFINITY);
        }
        let alpha = if a[k * m + k] > 0.0 { -norm } else { norm };
        // v = x - alpha e_1 stored in place of column k
        a[k * m + k] -= alpha;
        let vnorm2: f64 = (k..n).map(|i| a[i * m + k].powi(2)).sum();
        if vnorm2 > 0.0 {
            for j in (k + 1)..m {
                let dot: f64 = (k..n).map(|i| a[i * m + k] * a[i * m + j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..n {
                    a[i * m + j] -= f * a[i * m + k];
                }
            }
            let dot: f64 = (k..n).map(|i| a[i * m + k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..n {
                b[i] -= f * a[i * m + k];
            }
        }
        diag[k] = alpha;
    }
    let r = |i: usize, j: usize| if i == j { diag[i] } else { a[i * m + j] };

    let back_substitute = |rhs: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..m {
                s -= r(i, j) * x[j];
            }
            x[i] = s / r(i, i);
        }
        x
    };
    let solution = back_substitute(&b[..m]);

    let r_norm = (0..m)
        .map(|j| (0..=j).map(|i| r(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut inv_norm: f64 = 0.0;
    let mut unit = vec![0.0; m];
    for j in 0..m {
        unit.iter_mut().for_each(|u| *u = 0.0);
        unit[j] = 1.0;
        let col = back_substitute(&unit);
        inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
    }
    (solution, r_norm * inv_norm)
}
