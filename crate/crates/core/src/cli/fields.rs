//! Piecewise fitted fields on a dense abscissa.
//!
//! Each grid point owns the interval from halfway to its left neighbour to
//! halfway to its right neighbour (the end points own half an interval).
//! Inside it the density and velocity come from that point's own fits.

use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::output::{fmt_f64, OutputError};
use crate::fitting::{fit_at_point, FitError, FitPolicy};
use crate::wavestate::{AnalyticState, WaveState};

pub const FIELDS_HEADER: &str = "x,owner,density_fit,velocity_fit,density_exact,velocity_exact";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    /// Grid point whose fits produced this sample.
    pub owner: usize,
    pub density_fit: f64,
    pub velocity_fit: f64,
    pub density_exact: f64,
    /// `None` at a node of the analytic solution.
    pub velocity_exact: Option<f64>,
}

/// `samples` points per neighbourhood, plus the last grid point itself.
pub fn sample_fields(
    state: &WaveState,
    amp_policy: &FitPolicy,
    phase_policy: &FitPolicy,
    reference: &AnalyticState,
    samples: usize,
) -> Result<Vec<FieldSample>, FitError> {
    let q = state.positions();
    let n = q.len();
    let t = state.time();
    let mut out = Vec::with_capacity(n * samples + 1);
    for j in 0..n {
        let c_fit = fit_at_point(q, state.log_amp(), j, amp_policy)?;
        let s_fit = fit_at_point(q, state.phase(), j, phase_policy)?;
        let lo = if j == 0 {
            q[0]
        } else {
            0.5 * (q[j - 1] + q[j])
        };
        let hi = if j + 1 == n {
            q[n - 1]
        } else {
            0.5 * (q[j] + q[j + 1])
        };
        let count = if j + 1 == n { samples + 1 } else { samples };
        for k in 0..count {
            let x = lo + (hi - lo) * k as f64 / samples as f64;
            out.push(FieldSample {
                x,
                owner: j,
                density_fit: (2.0 * c_fit.eval(x, 0)).exp(),
                velocity_fit: s_fit.eval(x, 1),
                density_exact: reference.density(t, x),
                velocity_exact: reference.velocity(t, x).ok(),
            });
        }
    }
    Ok(out)
}

pub fn write_fields(path: &Path, samples: &[FieldSample]) -> Result<(), OutputError> {
    let io_err = |source: io::Error| OutputError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    let mut body = || -> io::Result<()> {
        writeln!(w, "{FIELDS_HEADER}")?;
        for s in samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(s.x),
                s.owner,
                fmt_f64(s.density_fit),
                fmt_f64(s.velocity_fit),
                fmt_f64(s.density_exact),
                s.velocity_exact.map(fmt_f64).unwrap_or_default(),
            )?;
        }
        w.flush()
    };
    body().map_err(io_err)
}
