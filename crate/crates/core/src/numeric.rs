//! Small numerical helpers shared across modules.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Bisection on a bracketed sign change.
///
/// Stops when the bracket is narrower than `x_tol` or `|f| < f_tol`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, x_tol: f64, f_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm.abs() < f_tol || (b - a).abs() < x_tol {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Evenly spaced samples including both endpoints.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}

/// Full width at half maximum of a sampled curve, with linear
/// interpolation at the outermost half-maximum crossings.
///
/// Returns `None` when the curve never falls below half maximum on
/// one side (the width is then not resolved by the samples).
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lo, hi) = half_max_crossings(x, y)?;
    Some(hi - lo)
}

/// Positions of the outermost half-maximum crossings.
pub fn half_max_crossings(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let first = y.iter().position(|&v| v >= half)?;
    let last = y.iter().rposition(|&v| v >= half)?;
    if first == 0 || last == y.len() - 1 {
        return None;
    }
    let interp = |i0: usize, i1: usize| x[i0] + (half - y[i0]) * (x[i1] - x[i0]) / (y[i1] - y[i0]);
    Some((interp(first - 1, first), interp(last, last + 1)))
}

/// Standard normal cumulative distribution.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normalized sinc, `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub(crate) fn ensure_finite_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite and positive, got {v}")))
    }
}
