//! Two-photon interference dips and Gaussian dip fitting.
//!
//! Hong-Ou-Mandel: for a filtered pair amplitude `g(λ_t, λ_h)` meeting on a
//! lossless 50/50 splitter with relative delay τ, the coincidence
//! probability is
//!
//! ```text
//! P(τ) = ½ (1 − Re J(τ) / Σ|g|²),   J(τ) = Σ g(t,h) · conj(g(h,t)) · e^{iΔω τ}
//! ```
//!
//! with `Δω = 2πc (1/λ_t − 1/λ_h)`. Rarity–Tapster: in the weak-field limit
//! the heralded photon and a coherent pulse in mode φ give a three-fold
//! dip of depth `V(τ) = m · ⟨φ_τ|ρ_h|φ_τ⟩`, where `m` lumps together
//! every non-spectral distinguishability.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ensure_finite_positive;
use crate::optics::FilterSpec;
use crate::spectrum::{SpectralDensityOp, SpectralGrid, SpectralMode, C_NM_PER_FS};

/// Largest coherent-pulse mean photon number for which two-photon terms
/// of the weak pulse are negligible.
pub const MAX_MEAN_PHOTON_NUMBER: f64 = 0.1;

/// Path length per femtosecond of delay, µm.
pub const MICROMETERS_PER_FS: f64 = C_NM_PER_FS * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayUnit {
    Femtoseconds,
    Micrometers,
}

impl DelayUnit {
    pub fn label(&self) -> &'static str {
        match self {
            DelayUnit::Femtoseconds => "fs",
            DelayUnit::Micrometers => "um",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DipKind {
    HomTwofold,
    RtThreefold,
}

/// Coincidence counts per bin versus relative delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipTrace {
    pub delays: Vec<f64>,
    pub delay_unit: DelayUnit,
    pub counts: Vec<f64>,
    pub bin_duration_s: f64,
    pub kind: DipKind,
}

impl DipTrace {
    pub fn new(delays: Vec<f64>, delay_unit: DelayUnit, counts: Vec<f64>, bin_duration_s: f64, kind: DipKind) -> Result<Self> {
        let t = Self {
            delays,
            delay_unit,
            counts,
            bin_duration_s,
            kind,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        check_delays(&self.delays)?;
        if self.counts.len() != self.delays.len() {
            return Err(Error::invalid("counts and delays differ in length"));
        }
        if !self.counts.iter().all(|c| c.is_finite() && *c >= 0.0) {
            return Err(Error::invalid("counts must be finite and non-negative"));
        }
        ensure_finite_positive("bin_duration_s", self.bin_duration_s)
    }

    /// The same trace with delays expressed as path length.
    pub fn in_micrometers(&self) -> Self {
        let mut t = self.clone();
        if t.delay_unit == DelayUnit::Femtoseconds {
            t.delays.iter_mut().for_each(|d| *d *= MICROMETERS_PER_FS);
            t.delay_unit = DelayUnit::Micrometers;
        }
        t
    }

    fn decile(&self) -> usize {
        (self.counts.len() / 10).max(1)
    }

    /// Mean of the first and last deciles.
    pub fn wing_level(&self) -> f64 {
        let k = self.decile();
        let n = self.counts.len();
        let sum: f64 = self.counts[..k].iter().chain(&self.counts[n - k..]).sum();
        sum / (2 * k) as f64
    }

    /// `(wings − minimum) / wings` read directly off the samples.
    pub fn raw_visibility(&self) -> f64 {
        let wings = self.wing_level();
        let min = self.counts.iter().cloned().fold(f64::INFINITY, f64::min);
        if wings > 0.0 {
            (wings - min) / wings
        } else {
            0.0
        }
    }

    /// Replace each expected count with a Poisson draw.
    pub fn with_poisson_noise(&self, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = self.clone();
        for c in t.counts.iter_mut() {
            if *c > 0.0 {
                let d = Poisson::new(*c).map_err(|e| Error::invalid(e.to_string()))?;
                *c = d.sample(&mut rng);
            }
        }
        Ok(t)
    }
}

fn check_delays(delays: &[f64]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::invalid("no delay samples"));
    }
    if !delays.iter().all(|d| d.is_finite()) || !delays.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid("delays must be finite and strictly increasing"));
    }
    Ok(())
}

/// Exchange-overlap terms `(g(t,h)·conj(g(h,t)), Δω)` of the filtered amplitude
/// and its norm `Σ|g|²`.
fn exchange_terms(grid: &SpectralGrid, f2: &FilterSpec, f3: &FilterSpec) -> Result<(Vec<(Complex64, f64)>, f64)> {
    f2.validate()?;
    f3.validate()?;
    if grid.trigger_axis != grid.heralded_axis {
        return Err(Error::invalid("HOM interference needs identical trigger and heralded axes"));
    }
    let axis = &grid.trigger_axis;
    let n = axis.len();
    let step = grid.trigger_step();
    let t2: Vec<f64> = axis.iter().map(|&l| f2.cell_transmission(l, step)).collect();
    let t3: Vec<f64> = axis.iter().map(|&l| f3.cell_transmission(l, step)).collect();
    let g = |i: usize, j: usize| grid.at(i, j) * (t2[i] * t3[j]).sqrt();
    let mut norm = 0.0;
    let mut terms = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = g(i, j);
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            norm += a.norm_sqr();
            let c = a * g(j, i).conj();
            if c != Complex64::new(0.0, 0.0) {
                terms.push((c, 2.0 * PI * C_NM_PER_FS * (1.0 / axis[i] - 1.0 / axis[j])));
            }
        }
    }
    if !(norm > 0.0) {
        return Err(Error::ZeroOverlap("filters F2/F3 remove the whole joint spectrum".into()));
    }
    Ok((terms, norm))
}

/// HOM coincidence probability at each delay (fs).
pub fn hom_probability(grid: &SpectralGrid, f2: &FilterSpec, f3: &FilterSpec, delays_fs: &[f64]) -> Result<Vec<f64>> {
    check_delays(delays_fs)?;
    let (terms, norm) = exchange_terms(grid, f2, f3)?;
    Ok(delays_fs
        .par_iter()
        .map(|&tau| {
            let re: f64 = terms.iter().map(|(c, w)| (c * Complex64::from_polar(1.0, w * tau)).re).sum();
            (0.5 * (1.0 - re / norm)).max(0.0)
        })
        .collect())
}

/// HOM dip visibility, `1 − 2P(0)`.
pub fn hom_visibility(grid: &SpectralGrid, f2: &FilterSpec, f3: &FilterSpec) -> Result<f64> {
    Ok(1.0 - 2.0 * hom_probability(grid, f2, f3, &[0.0])?[0])
}

/// HOM coincidence trace; counts are `pair_rate · bin · P(τ)`, so the
/// wings sit at half the rate of pairs reaching the splitter.
pub fn hom_dip(
    grid: &SpectralGrid,
    f2: &FilterSpec,
    f3: &FilterSpec,
    delays_fs: &[f64],
    pair_rate_hz: f64,
    bin_duration_s: f64,
) -> Result<DipTrace> {
    ensure_finite_positive("pair rate", pair_rate_hz)?;
    ensure_finite_positive("bin duration", bin_duration_s)?;
    let p = hom_probability(grid, f2, f3, delays_fs)?;
    DipTrace::new(
        delays_fs.to_vec(),
        DelayUnit::Femtoseconds,
        p.iter().map(|v| pair_rate_hz * bin_duration_s * v).collect(),
        bin_duration_s,
        DipKind::HomTwofold,
    )
}

/// Residual distinguishability factor `m` that makes the zero-delay RT
/// visibility equal `target`.
pub fn calibrate_mode_overlap(rho: &SpectralDensityOp, mode: &SpectralMode, target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid(format!("target visibility {target} outside [0, 1]")));
    }
    let overlap = rho.expectation(mode)?;
    if !(overlap > 0.0) {
        return Err(Error::ZeroOverlap("coherent mode and heralded state do not overlap".into()));
    }
    let m = target / overlap;
    if m > 1.0 {
        return Err(Error::invalid(format!(
            "spectral overlap {overlap} is below the target visibility {target}"
        )));
    }
    Ok(m)
}

/// RT visibility `m·⟨φ_τ|ρ|φ_τ⟩` at each delay (fs).
pub fn rt_visibility(rho: &SpectralDensityOp, mode: &SpectralMode, mode_overlap_factor: f64, delays_fs: &[f64]) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&mode_overlap_factor) {
        return Err(Error::invalid(format!(
            "mode_overlap_factor {mode_overlap_factor} outside [0, 1]"
        )));
    }
    check_delays(delays_fs)?;
    delays_fs
        .par_iter()
        .map(|&tau| Ok(mode_overlap_factor * rho.expectation(&mode.delayed(tau))?))
        .collect()
}

/// RT three-fold trace with counts `baseline · (1 − V(τ))`.
#[allow(clippy::too_many_arguments)]
pub fn rt_dip(
    rho: &SpectralDensityOp,
    mode: &SpectralMode,
    mean_photon_number: f64,
    mode_overlap_factor: f64,
    delays_fs: &[f64],
    baseline_counts: f64,
    bin_duration_s: f64,
) -> Result<DipTrace> {
    if !(mean_photon_number > 0.0 && mean_photon_number <= MAX_MEAN_PHOTON_NUMBER) {
        return Err(Error::invalid(format!(
            "mean photon number {mean_photon_number} outside the weak-field bound (0, {MAX_MEAN_PHOTON_NUMBER}]"
        )));
    }
    ensure_finite_positive("baseline counts", baseline_counts)?;
    let v = rt_visibility(rho, mode, mode_overlap_factor, delays_fs)?;
    DipTrace::new(
        delays_fs.to_vec(),
        DelayUnit::Femtoseconds,
        v.iter().map(|v| baseline_counts * (1.0 - v).max(0.0)).collect(),
        bin_duration_s,
        DipKind::RtThreefold,
    )
}

/// Least-squares fit of `N(τ) = B (1 − V exp(−(τ − τ₀)² / 2σ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipFit {
    pub visibility: f64,
    pub center: f64,
    /// Gaussian σ, in delay units.
    pub width: f64,
    pub baseline: f64,
    /// RMS residual relative to the baseline.
    pub residual_norm: f64,
    /// Three RMS residuals relative to the baseline; smaller visibilities
    /// are indistinguishable from noise.
    pub noise_floor: f64,
    /// False when the dip is within the noise floor, in which case
    /// center and width are not identifiable.
    pub dip_resolved: bool,
    pub iterations: usize,
}

const FIT_MAX_ITERATIONS: usize = 500;
const FIT_STEP_TOL: f64 = 1e-10;
const FIT_POLISH_STEPS: usize = 8;
const FIT_MAX_DAMPING: f64 = 1e12;

fn model(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (b, v, t0, s) = (p[0], p[1], p[2], p[3]);
    let d = x - t0;
    let e = (-d * d / (2.0 * s * s)).exp();
    let y = b * (1.0 - v * e);
    let grad = Vector4::new(1.0 - v * e, -b * e, -b * v * e * d / (s * s), -b * v * e * d * d / (s * s * s));
    (y, grad)
}

fn cost(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - model(p, xi).0).powi(2)).sum()
}

fn clamp_params(mut p: Vector4<f64>, min_width: f64) -> Vector4<f64> {
    p[1] = p[1].clamp(0.0, 1.0);
    p[3] = p[3].abs().max(min_width);
    p
}

fn normal_equations(p: &Vector4<f64>, x: &[f64], y: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let (m, g) = model(p, xi);
        jtj += g * g.transpose();
        jtr += g * (yi - m);
    }
    (jtj, jtr)
}

/// Solve `a·step = rhs`, freezing parameters that sit on a bound and are
/// pushed outward so the rest move along the projected direction.
fn bounded_step(a: &Matrix4<f64>, rhs: &Vector4<f64>, p: &Vector4<f64>, min_width: f64) -> Vector4<f64> {
    let mut frozen = [false; 4];
    let mut step = Vector4::zeros();
    for _ in 0..4 {
        let mut m = *a;
        let mut r = *rhs;
        for i in (0..4).filter(|&i| frozen[i]) {
            for j in 0..4 {
                m[(i, j)] = 0.0;
                m[(j, i)] = 0.0;
            }
            m[(i, i)] = 1.0;
            r[i] = 0.0;
        }
        step = m.lu().solve(&r).unwrap_or_else(Vector4::zeros);
        let outward = [
            false,
            (p[1] >= 1.0 && step[1] > 0.0) || (p[1] <= 0.0 && step[1] < 0.0),
            false,
            p[3] <= min_width && step[3] < 0.0,
        ];
        if (0..4).all(|i| !outward[i] || frozen[i]) {
            break;
        }
        (0..4).for_each(|i| frozen[i] |= outward[i]);
    }
    step
}

/// Largest parameter change, relative to baseline, unity and width.
fn relative_change(p: &Vector4<f64>, q: &Vector4<f64>) -> f64 {
    let d = q - p;
    let scales = [p[0].abs(), 1.0, p[3].abs(), p[3].abs()];
    (0..4).map(|i| d[i].abs() / scales[i].max(1e-300)).fold(0.0, f64::max)
}

/// Levenberg–Marquardt fit of a Gaussian dip.
///
/// σ is bounded below by half the smallest delay spacing and V is held
/// in [0, 1].
pub fn fit_gaussian_dip(trace: &DipTrace) -> Result<DipFit> {
    trace.validate()?;
    let n = trace.counts.len();
    if n < 7 {
        return Err(Error::invalid(format!("dip fit needs ≥ 7 samples, got {n}")));
    }
    let k = trace.decile();
    let first = trace.counts[..k].iter().sum::<f64>() / k as f64;
    let last = trace.counts[n - k..].iter().sum::<f64>() / k as f64;
    if !(first > 0.0 && last > 0.0) || (first - last).abs() > 0.1 * first.max(last) {
        return Err(Error::WingsAbsent(format!(
            "first and last deciles average {first} and {last}"
        )));
    }

    // Work in units of the initial baseline so the fit is scale-free.
    let scale = 0.5 * (first + last);
    let x = &trace.delays;
    let y: Vec<f64> = trace.counts.iter().map(|c| c / scale).collect();
    let span = x[n - 1] - x[0];
    // A dip narrower than the sampling cannot be told apart from one low sample.
    let min_width = 0.5 * x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);

    let (imin, ymin) = y
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let v0 = (1.0 - ymin).clamp(0.0, 1.0);
    let level = 1.0 - 0.5 * v0;
    let left = (0..imin).rev().find(|&i| y[i] >= level);
    let right = (imin + 1..n).find(|&i| y[i] >= level);
    let sigma0 = match (left, right) {
        (Some(l), Some(r)) if v0 > 0.0 => (0.5 * (x[r] - x[l]) / (2.0 * 2f64.ln()).sqrt()).max(min_width),
        _ => 0.1 * span,
    };
    let mut p = Vector4::new(1.0, v0, x[imin], sigma0);
    let mut c = cost(&p, x, &y);
    let mut lambda = 1e-3;

    for it in 1..=FIT_MAX_ITERATIONS {
        let (jtj, jtr) = normal_equations(&p, x, &y);
        let max_diag = (0..4).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut damped = jtj;
        for i in 0..4 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * max_diag);
        }
        let trial = clamp_params(p + bounded_step(&damped, &jtr, &p, min_width), min_width);
        let trial_cost = cost(&trial, x, &y);
        // Only accepted steps count towards convergence; a run of
        // rejections ending in saturated damping means no descent is left.
        let converged = if trial_cost <= c {
            let rel = relative_change(&p, &trial);
            p = trial;
            c = trial_cost;
            lambda = (lambda * 0.1).max(1e-15);
            rel < FIT_STEP_TOL
        } else {
            lambda *= 10.0;
            lambda > FIT_MAX_DAMPING
        };
        if converged {
            // Cost differences vanish in rounding long before the gradient
            // does, so finish with plain Gauss-Newton steps.
            for _ in 0..FIT_POLISH_STEPS {
                let (jtj, jtr) = normal_equations(&p, x, &y);
                let trial = clamp_params(p + bounded_step(&jtj, &jtr, &p, min_width), min_width);
                let trial_cost = cost(&trial, x, &y);
                if !(trial_cost <= c * (1.0 + 1e-12)) {
                    break;
                }
                let rel = relative_change(&p, &trial);
                p = trial;
                c = trial_cost;
                if rel < 1e-15 {
                    break;
                }
            }
            let rms = (c / n as f64).sqrt();
            let noise_floor = 3.0 * rms / p[0];
            return Ok(DipFit {
                visibility: p[1],
                center: p[2],
                width: p[3],
                baseline: p[0] * scale,
                residual_norm: rms / p[0],
                noise_floor,
                dip_resolved: p[1] > noise_floor,
                iterations: it,
            });
        }
    }
    Err(Error::FitNonConvergence {
        iterations: FIT_MAX_ITERATIONS,
    })
}
