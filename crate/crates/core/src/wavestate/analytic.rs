//! Exact free evolution of a superposition of Gaussian packets.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// `|psi|^2` below this is treated as a node.
pub const NODE_DENSITY_FLOOR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("analytic state needs at least one packet")]
    NoPackets,
    #[error("packet {index}: sigma must be positive and finite, got {sigma}")]
    InvalidSigma { index: usize, sigma: f64 },
    #[error("packet {index}: non-finite weight or center")]
    NonFinite { index: usize },
    #[error("node of psi at x = {x}, t = {t} (|psi|^2 = {density:e})")]
    Node { x: f64, t: f64, density: f64 },
}

/// One free Gaussian component. `sigma` is the width parameter of the
/// packet: at `t = 0` the density of a lone packet is proportional to
/// `exp(-x^2 / sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub weight: Complex64,
    pub center: f64,
    pub sigma: f64,
}

impl GaussianPacket {
    /// `(sigma / (pi (sigma + i t)^2))^(1/4) exp(-x^2 (sigma - i t) / (2 (sigma^2 + t^2)))`
    /// with `x` already shifted by the packet center.
    fn profile(&self, t: f64, x: f64) -> Complex64 {
        let sigma = self.sigma;
        let s = Complex64::new(sigma, t);
        let prefactor = (Complex64::from(sigma) / (PI * s * s)).powf(0.25);
        let exponent = -x * x / (2.0 * (sigma * sigma + t * t)) * Complex64::new(sigma, -t);
        prefactor * exponent.exp()
    }

    /// d(ln profile)/dx.
    fn log_slope(&self, t: f64, x: f64) -> Complex64 {
        let sigma = self.sigma;
        -x * Complex64::new(sigma, -t) / (sigma * sigma + t * t)
    }
}

/// Exact solution of the free Schrödinger equation for a Gaussian
/// superposition.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticState {
    packets: Vec<GaussianPacket>,
}

impl AnalyticState {
    pub fn new(packets: Vec<GaussianPacket>) -> Result<Self, AnalyticError> {
        if packets.is_empty() {
            return Err(AnalyticError::NoPackets);
        }
        for (index, p) in packets.iter().enumerate() {
            if !(p.sigma > 0.0 && p.sigma.is_finite()) {
                return Err(AnalyticError::InvalidSigma {
                    index,
                    sigma: p.sigma,
                });
            }
            if !(p.weight.is_finite() && p.center.is_finite()) {
                return Err(AnalyticError::NonFinite { index });
            }
        }
        Ok(Self { packets })
    }

    /// Single packet with unit weight.
    pub fn single(center: f64, sigma: f64) -> Self {
        Self::new(vec![GaussianPacket {
            weight: Complex64::new(1.0, 0.0),
            center,
            sigma,
        }])
        .expect("valid single packet")
    }

    /// Two packets at `x = -3` and `x = 3`, `sigma = 4`, weights `1/sqrt(2)`.
    ///
    /// The packets overlap, so the total norm is `1 + exp(-9/4)` rather than
    /// 1; see [`AnalyticState::normalized`].
    pub fn two_packet_default() -> Self {
        let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(vec![
            GaussianPacket {
                weight: w,
                center: 3.0,
                sigma: 4.0,
            },
            GaussianPacket {
                weight: w,
                center: -3.0,
                sigma: 4.0,
            },
        ])
        .expect("valid default state")
    }

    pub fn packets(&self) -> &[GaussianPacket] {
        &self.packets
    }

    pub fn psi(&self, t: f64, x: f64) -> Complex64 {
        self.packets
            .iter()
            .map(|p| p.weight * p.profile(t, x - p.center))
            .sum()
    }

    pub fn dpsi_dx(&self, t: f64, x: f64) -> Complex64 {
        self.packets
            .iter()
            .map(|p| {
                let dx = x - p.center;
                p.weight * p.profile(t, dx) * p.log_slope(t, dx)
            })
            .sum()
    }

    pub fn density(&self, t: f64, x: f64) -> f64 {
        self.psi(t, x).norm_sqr()
    }

    /// Principal-branch phase `arg psi`.
    pub fn phase(&self, t: f64, x: f64) -> f64 {
        self.psi(t, x).arg()
    }

    /// Bohmian velocity `Im[psi' / psi]`.
    pub fn velocity(&self, t: f64, x: f64) -> Result<f64, AnalyticError> {
        let psi = self.psi(t, x);
        let density = psi.norm_sqr();
        if !(density >= NODE_DENSITY_FLOOR) {
            return Err(AnalyticError::Node { x, t, density });
        }
        Ok((psi.conj() * self.dpsi_dx(t, x)).im / density)
    }

    /// Exact `integral |psi|^2 dx`, from the closed-form overlaps of the
    /// packets at `t = 0` (the free evolution preserves it).
    pub fn norm(&self) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for a in &self.packets {
            for b in &self.packets {
                let sum = a.sigma + b.sigma;
                let d = a.center - b.center;
                let overlap =
                    (2.0 * (a.sigma * b.sigma).sqrt() / sum).sqrt() * (-d * d / (2.0 * sum)).exp();
                total += a.weight.conj() * b.weight * overlap;
            }
        }
        total.re
    }

    /// Copy with all weights rescaled so that [`AnalyticState::norm`] is 1.
    pub fn normalized(&self) -> Self {
        let scale = 1.0 / self.norm().sqrt();
        Self {
            packets: self
                .packets
                .iter()
                .map(|p| GaussianPacket {
                    weight: p.weight * scale,
                    ..*p
                })
                .collect(),
        }
    }

    /// Interval outside which the initial density is below `exp(-100)`
    /// relative to its packet peaks.
    pub fn initial_support(&self) -> (f64, f64) {
        let reach = |p: &GaussianPacket| 10.0 * p.sigma.sqrt();
        let lo = self
            .packets
            .iter()
            .map(|p| p.center - reach(p))
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .packets
            .iter()
            .map(|p| p.center + reach(p))
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn default_state_real_at_origin() {
        let psi = AnalyticState::two_packet_default().psi(0.0, 0.0);
        assert_eq!(psi.im, 0.0);
        assert!(psi.re > 0.0);
    }

    #[test]
    fn single_packet_peak_value() {
        let psi = AnalyticState::single(0.0, 4.0).psi(0.0, 0.0);
        let expected = (1.0 / (4.0 * PI)).powf(0.25);
        assert!((psi.re - expected).abs() < 1e-15);
        assert!((psi.re - 0.531126).abs() < 1e-6);
        assert_eq!(psi.im, 0.0);
    }

    #[test]
    fn single_packet_is_normalized() {
        let state = AnalyticState::single(1.0, 4.0);
        let norm = simpson(|x| state.density(0.0, x), -25.0, 25.0, 20_000);
        assert!((norm - 1.0).abs() < 1e-6, "norm = {norm}");
    }

    #[test]
    fn default_state_norm_includes_overlap() {
        // 1/2 (1 + 1 + 2 <g(x-3), g(x+3)>) with overlap exp(-d^2 / (4 sigma))
        let state = AnalyticState::two_packet_default();
        let expected = 1.0 + (-36.0f64 / 16.0).exp();
        let norm = simpson(|x| state.density(0.0, x), -25.0, 25.0, 20_000);
        assert!((norm - expected).abs() < 1e-6, "norm = {norm}");
        assert!((state.norm() - expected).abs() < 1e-14);
    }

    #[test]
    fn norm_is_conserved_in_time() {
        let state = AnalyticState::two_packet_default();
        let norm = simpson(|x| state.density(7.5, x), -40.0, 40.0, 40_000);
        assert!((norm - state.norm()).abs() < 1e-6, "norm = {norm}");
    }

    #[test]
    fn normalized_state_has_unit_norm() {
        let state = AnalyticState::two_packet_default().normalized();
        let norm = simpson(|x| state.density(0.0, x), -25.0, 25.0, 20_000);
        assert!((norm - 1.0).abs() < 1e-6, "norm = {norm}");
        // rescaling leaves the velocity field alone
        let raw = AnalyticState::two_packet_default();
        assert!(
            (state.velocity(2.0, 1.3).unwrap() - raw.velocity(2.0, 1.3).unwrap()).abs() < 1e-14
        );
    }

    #[test]
    fn initial_velocity_vanishes() {
        let state = AnalyticState::two_packet_default();
        for x in [-7.0, -3.0, -0.5, 0.0, 1.2, 6.0] {
            assert_eq!(state.velocity(0.0, x).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_packet_velocity_closed_form() {
        let v = AnalyticState::single(0.0, 4.0).velocity(3.0, 4.0).unwrap();
        assert!((v - 0.48).abs() < 1e-14);
    }

    #[test]
    fn symmetric_state_has_zero_velocity_at_origin() {
        let v = AnalyticState::two_packet_default()
            .velocity(0.1, 0.0)
            .unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn velocity_at_node_is_an_error() {
        let err = AnalyticState::single(0.0, 1.0)
            .velocity(0.0, 60.0)
            .unwrap_err();
        assert!(matches!(err, AnalyticError::Node { .. }));
    }

    #[test]
    fn rejects_bad_packets() {
        assert_eq!(AnalyticState::new(vec![]), Err(AnalyticError::NoPackets));
        let bad = GaussianPacket {
            weight: Complex64::new(1.0, 0.0),
            center: 0.0,
            sigma: 0.0,
        };
        assert!(matches!(
            AnalyticState::new(vec![bad]),
            Err(AnalyticError::InvalidSigma { index: 0, .. })
        ));
    }

    #[test]
    fn trajectory_follows_spreading_law() {
        // RK4 on dx/dt = v(t, x) against x0 sqrt(1 + t^2 / sigma^2)
        let sigma = 4.0;
        let state = AnalyticState::single(0.0, sigma);
        let v = |t: f64, x: f64| state.velocity(t, x).unwrap();
        for x0 in [-2.5, -0.7, 0.3, 1.9] {
            let (mut t, mut x) = (0.0, x0);
            let h = 1e-3;
            for _ in 0..5000 {
                let k1 = v(t, x);
                let k2 = v(t + h / 2.0, x + h / 2.0 * k1);
                let k3 = v(t + h / 2.0, x + h / 2.0 * k2);
                let k4 = v(t + h, x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t += h;
            }
            let exact = x0 * ((sigma * sigma + t * t) / (sigma * sigma)).sqrt();
            assert!(((x - exact) / exact).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn velocity_matches_phase_gradient(t in 0.0f64..20.0, x in -12.0f64..12.0) {
            let state = AnalyticState::two_packet_default();
            prop_assume!(state.density(t, x) > 1e-6);
            let h = 1e-6;
            let up = state.psi(t, x + h);
            let dn = state.psi(t, x - h);
            // phase difference without branch jumps
            let dphase = (up * dn.conj()).arg();
            let fd = dphase / (2.0 * h);
            let v = state.velocity(t, x).unwrap();
            prop_assert!((v - fd).abs() < 1e-5, "v={} fd={}", v, fd);
        }
    }
}
