//! Discretized two-photon joint spectrum and the quantities derived from it:
//! heralded marginals, tilt-scanned spectrometer traces and the heralded
//! photon's spectral density operator.
//!
//! The joint amplitude on a `(λ_t, λ_h)` grid is
//!
//! ```text
//! f(λ_t, λ_h) = sqrt(Ī_p) · ∫ dq  A_t(q) · A_h(q) · sinc(Δk_z(q) · L / 2)
//! Δk_z(q)     = k_p − sqrt(k_t² − q²) − sqrt(k_h² − q²)
//! ```
//!
//! where `q` is the transverse wavenumber shared by the pair (conserved
//! across the exit face, so `sin θ_ext = q λ / 2π`), `A` is the fiber
//! coupling amplitude at that external angle and `Ī_p` is the pump
//! intensity averaged over the grid cell. Averaging the pump over each cell
//! rather than sampling it keeps the monochromatic limit well defined: the
//! support collapses onto the cells crossed by the energy-conservation line.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::SellmeierSet;
use crate::error::{Error, Result};
use crate::numeric::{ensure_finite_positive, fwhm, half_max_crossings, linspace, normal_cdf, normal_pdf, sinc};
use crate::optics::{CollectionGeometry, FilterSpec};
use crate::phasematch::{pump_wavenumber, wavenumber, AcceptanceWindow, CrystalCut};

/// Speed of light in nm/fs.
pub const C_NM_PER_FS: f64 = 299.792_458;

/// Time-bandwidth product of a transform-limited Gaussian pulse.
pub const GAUSSIAN_TBP: f64 = 0.441;

pub const PUMP_CHIRP: &str = "transform-limited";

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpPulse {
    pub center_nm: f64,
    pub duration_fwhm_fs: f64,
    pub repetition_rate_mhz: f64,
    pub average_power_mw: f64,
}

impl Default for PumpPulse {
    fn default() -> Self {
        Self {
            center_nm: 390.0,
            duration_fwhm_fs: 150.0,
            repetition_rate_mhz: 76.0,
            average_power_mw: 79.0,
        }
    }
}

impl PumpPulse {
    pub fn validate(&self) -> Result<()> {
        ensure_finite_positive("pump center_nm", self.center_nm)?;
        ensure_finite_positive("pump duration_fwhm_fs", self.duration_fwhm_fs)?;
        ensure_finite_positive("pump repetition_rate_mhz", self.repetition_rate_mhz)?;
        ensure_finite_positive("pump average_power_mw", self.average_power_mw)
    }

    /// Intensity FWHM in wavelength, `0.441 λ² / (c Δt)`.
    pub fn spectral_fwhm_nm(&self) -> f64 {
        GAUSSIAN_TBP * self.center_nm * self.center_nm / (C_NM_PER_FS * self.duration_fwhm_fs)
    }

    /// Intensity standard deviation in vacuum wavenumber (1/nm).
    pub fn wavenumber_sigma(&self) -> f64 {
        GAUSSIAN_TBP / (C_NM_PER_FS * self.duration_fwhm_fs) / FWHM_PER_SIGMA
    }

    /// Unit-peak spectral amplitude, Gaussian in frequency and real for
    /// a transform-limited pulse.
    pub fn spectral_amplitude(&self, lambda_nm: f64) -> Complex64 {
        let z = (1.0 / lambda_nm - 1.0 / self.center_nm) / self.wavenumber_sigma();
        Complex64::new((-0.25 * z * z).exp(), 0.0)
    }

    /// Pump intensity (unit peak) averaged over the rectangle
    /// `ν_t ∈ [a ± δ_t]`, `ν_h ∈ [b ± δ_h]` in wavenumber, with the pump
    /// evaluated at `ν_t + ν_h`.
    pub(crate) fn cell_intensity(&self, a: f64, b: f64, dt: f64, dh: f64) -> f64 {
        let sigma = self.wavenumber_sigma();
        let nu0 = 1.0 / self.center_nm;
        let s = a + b;
        if dt + dh < 1e-3 * sigma {
            let z = (s - nu0) / sigma;
            return (-0.5 * z * z).exp();
        }
        // Second antiderivative of the unit-peak Gaussian, up to the factor
        // sqrt(2π)σ². Its linear part cancels in the double difference, so
        // on the far side of the peak the reflected tail is used instead.
        let h = |z: f64| z * normal_cdf(z) + normal_pdf(z);
        let zs = [s + dt + dh, s + dt - dh, s - dt + dh, s - dt - dh].map(|x| (x - nu0) / sigma);
        let g: [f64; 4] = if zs[3] > 0.0 {
            zs.map(|z| h(-z))
        } else {
            zs.map(h)
        };
        let second_diff = (g[0] - g[1]) - (g[2] - g[3]);
        let v = (2.0 * PI).sqrt() * sigma * sigma * second_diff / (4.0 * dt * dh);
        v.max(0.0)
    }
}

/// Axis range and resolution of a joint-spectrum grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Common range of both wavelength axes, nm.
    pub range_nm: (f64, f64),
    /// Samples per wavelength axis.
    pub points: usize,
    /// Samples of the transverse-wavenumber integral.
    pub angle_samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            range_nm: (762.0, 798.0),
            points: 361,
            angle_samples: 81,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.range_nm;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!("grid range ({lo}, {hi}) is degenerate")));
        }
        if self.points < 3 || self.angle_samples < 3 {
            return Err(Error::invalid("grid needs at least 3 points per axis and 3 angle samples"));
        }
        Ok(())
    }

    pub fn step_nm(&self) -> f64 {
        (self.range_nm.1 - self.range_nm.0) / (self.points - 1) as f64
    }

    /// Refine (or coarsen) both sampling densities by `factor`, keeping
    /// the end points.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ensure_finite_positive("grid scale", factor)?;
        let scale = |n: usize| (((n - 1) as f64 * factor).round() as usize).max(2) + 1;
        let g = Self {
            range_nm: self.range_nm,
            points: scale(self.points),
            angle_samples: scale(self.angle_samples),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn axis(&self) -> Vec<f64> {
        linspace(self.range_nm.0, self.range_nm.1, self.points)
    }
}

/// Joint spectral amplitude on a uniform `(λ_t, λ_h)` grid, row-major in
/// the trigger index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralGrid {
    pub trigger_axis: Vec<f64>,
    pub heralded_axis: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    /// `Σ|f|² Δλ_t Δλ_h` before normalization.
    pub norm: f64,
}

impl SpectralGrid {
    /// Wrap raw samples and normalize them.
    pub fn from_samples(trigger_axis: Vec<f64>, heralded_axis: Vec<f64>, amplitude: Vec<Complex64>) -> Result<Self> {
        for axis in [&trigger_axis, &heralded_axis] {
            if axis.len() < 2 || !axis.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::invalid("grid axes must be strictly increasing with ≥ 2 samples"));
            }
        }
        if amplitude.len() != trigger_axis.len() * heralded_axis.len() {
            return Err(Error::invalid("amplitude size does not match axes"));
        }
        let mut g = Self {
            trigger_axis,
            heralded_axis,
            amplitude,
            norm: 0.0,
        };
        let norm = g.integrated_norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Empty("joint amplitude vanishes on the grid".into()));
        }
        let s = norm.sqrt();
        g.amplitude.iter_mut().for_each(|v| *v /= s);
        g.norm = norm;
        Ok(g)
    }

    pub fn trigger_step(&self) -> f64 {
        self.trigger_axis[1] - self.trigger_axis[0]
    }

    pub fn heralded_step(&self) -> f64 {
        self.heralded_axis[1] - self.heralded_axis[0]
    }

    pub fn at(&self, i_t: usize, i_h: usize) -> Complex64 {
        self.amplitude[i_t * self.heralded_axis.len() + i_h]
    }

    /// `Σ|f|² Δλ_t Δλ_h` of the current samples.
    pub fn integrated_norm(&self) -> f64 {
        self.amplitude.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.trigger_step() * self.heralded_step()
    }

    /// Largest `|f(t,h) − f(h,t)|`, or `None` if the axes differ.
    pub fn exchange_asymmetry(&self) -> Option<f64> {
        if self.trigger_axis != self.heralded_axis {
            return None;
        }
        let n = self.trigger_axis.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.at(i, j) - self.at(j, i)).norm());
            }
        }
        Some(worst)
    }

    /// Per-trigger-row weights `T_F1` averaged over each grid cell.
    fn trigger_weights(&self, filter: Option<&FilterSpec>) -> Vec<f64> {
        let step = self.trigger_step();
        self.trigger_axis
            .iter()
            .map(|&l| filter.map_or(1.0, |f| f.cell_transmission(l, step)))
            .collect()
    }
}

/// Build the normalized joint spectral amplitude.
pub fn build_joint_spectrum(
    pulse: &PumpPulse,
    cut: &CrystalCut,
    window: &AcceptanceWindow,
    geometry: &CollectionGeometry,
    set: &SellmeierSet,
    grid: &GridSpec,
) -> Result<SpectralGrid> {
    pulse.validate()?;
    cut.validate()?;
    window.validate()?;
    grid.validate()?;
    let axis = grid.axis();
    let n = axis.len();
    let step = grid.step_nm();
    let length_um = cut.thickness_um();

    // Crystal wavenumbers and coupling profiles per axis sample.
    let k: Vec<f64> = axis
        .iter()
        .map(|&l| Ok(wavenumber(set.index_ordinary(l)?, l)))
        .collect::<Result<_>>()?;
    let profiles = axis
        .iter()
        .map(|&l| geometry.coupling_profile(l))
        .collect::<Result<Vec<_>>>()?;

    // Transverse wavenumbers spanning the coupling profile at every axis
    // wavelength (six 1/e² half widths either side).
    let center = window.center_deg.to_radians();
    let half = profiles.iter().map(|p| p.half_width_rad()).fold(0.0, f64::max);
    let q_of = |theta: f64, lambda_nm: f64| 2.0 * PI * theta.sin() / (lambda_nm * 1e-3);
    let q_lo = q_of((center - 6.0 * half).max(0.0), grid.range_nm.1);
    let q_hi = q_of(center + 6.0 * half, grid.range_nm.0);
    let qs = linspace(q_lo, q_hi, grid.angle_samples);
    let dq = qs[1] - qs[0];

    // Per (q, λ): coupling amplitude and longitudinal wavenumber.
    let mut weight = vec![0.0; qs.len() * n];
    let mut kz = vec![0.0; qs.len() * n];
    for (iq, &q) in qs.iter().enumerate() {
        for (i, &l) in axis.iter().enumerate() {
            let s = q * l * 1e-3 / (2.0 * PI);
            if s < 1.0 && q < k[i] {
                weight[iq * n + i] = profiles[i].amplitude_weight(s.asin() - center);
                kz[iq * n + i] = (k[i] * k[i] - q * q).sqrt();
            }
        }
    }

    let nu: Vec<f64> = axis.iter().map(|&l| 1.0 / l).collect();
    let cells: Vec<(f64, f64)> = axis
        .iter()
        .map(|&l| {
            let (a, b) = (1.0 / (l + 0.5 * step), 1.0 / (l - 0.5 * step));
            (0.5 * (a + b), 0.5 * (b - a))
        })
        .collect();

    // Both axes share one grid and the integrand is symmetric under photon
    // exchange, so only the lower triangle is computed and then mirrored.
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(i + 1);
            for j in 0..=i {
                let intensity = pulse.cell_intensity(cells[i].0, cells[j].0, cells[i].1, cells[j].1);
                if intensity == 0.0 {
                    row.push(0.0);
                    continue;
                }
                let pump_nm = 1.0 / (nu[i] + nu[j]);
                let kp = pump_wavenumber(pump_nm, cut, set)?;
                let mut acc = 0.0;
                for iq in 0..qs.len() {
                    let (a, b) = (iq * n + i, iq * n + j);
                    let w = weight[a] * weight[b];
                    if w == 0.0 {
                        continue;
                    }
                    let dk = kp - (kz[a] + kz[b]);
                    acc += w * sinc(0.5 * dk * length_um);
                }
                row.push(intensity.sqrt() * acc * dq);
            }
            Ok(row)
        })
        .collect();
    let lower = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut amplitude = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = if j <= i { lower[i][j] } else { lower[j][i] };
            amplitude.push(Complex64::new(v, 0.0));
        }
    }
    SpectralGrid::from_samples(axis.clone(), axis, amplitude)
}

/// A sampled, unit-integral spectral density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub axis_nm: Vec<f64>,
    pub density: Vec<f64>,
}

impl Spectrum {
    pub fn step(&self) -> f64 {
        self.axis_nm[1] - self.axis_nm[0]
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }

    pub fn fwhm_nm(&self) -> Option<f64> {
        fwhm(&self.axis_nm, &self.density)
    }

    pub fn mean_nm(&self) -> f64 {
        self.axis_nm.iter().zip(&self.density).map(|(l, s)| l * s).sum::<f64>() * self.step()
    }

    /// `∫ S(λ)·T(λ) dλ` with the filter averaged over each sample cell.
    pub fn transmitted_fraction(&self, filter: &FilterSpec) -> f64 {
        let step = self.step();
        self.axis_nm
            .iter()
            .zip(&self.density)
            .map(|(&l, &s)| s * filter.cell_transmission(l, step))
            .sum::<f64>()
            * step
    }
}

fn marginal(grid: &SpectralGrid, filter: Option<&FilterSpec>) -> Result<Spectrum> {
    let weights = grid.trigger_weights(filter);
    let nh = grid.heralded_axis.len();
    let mut density = vec![0.0; nh];
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (j, d) in density.iter_mut().enumerate() {
            *d += w * grid.at(i, j).norm_sqr();
        }
    }
    let total: f64 = density.iter().sum::<f64>() * grid.heralded_step();
    if !(total > 0.0) {
        return Err(Error::ZeroOverlap("trigger filter misses the joint spectrum".into()));
    }
    density.iter_mut().for_each(|d| *d /= total);
    Ok(Spectrum {
        axis_nm: grid.heralded_axis.clone(),
        density,
    })
}

/// Heralded-photon spectrum conditioned on the trigger passing `trigger_filter`.
pub fn heralded_marginal(grid: &SpectralGrid, trigger_filter: &FilterSpec) -> Result<Spectrum> {
    trigger_filter.validate()?;
    marginal(grid, Some(trigger_filter))
}

/// Heralded-photon spectrum with no trigger filter.
pub fn heralded_marginal_unfiltered(grid: &SpectralGrid) -> Result<Spectrum> {
    marginal(grid, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub tilt_deg: f64,
    pub center_nm: f64,
    pub rate: f64,
}

/// Spectrometer trace from a tilt-tuned filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanTrace {
    pub points: Vec<ScanPoint>,
}

impl ScanTrace {
    /// Trace resampled on increasing filter center.
    fn by_center(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.center_nm.total_cmp(&b.center_nm));
        (pts.iter().map(|p| p.center_nm).collect(), pts.iter().map(|p| p.rate).collect())
    }

    /// FWHM in nm when the trace resolves both half-maximum crossings.
    pub fn fwhm_nm(&self) -> Option<f64> {
        let (x, y) = self.by_center();
        fwhm(&x, &y)
    }

    /// Width of the trace and its mirror image about the peak.
    ///
    /// Tilt tuning only reaches wavelengths below the untilted center, so
    /// a scan starting at normal incidence sees one side of a line centred
    /// near it; the width is twice the peak-to-lower-crossing distance.
    pub fn mirrored_fwhm_nm(&self) -> Option<f64> {
        let (x, y) = self.by_center();
        let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ip = y.iter().position(|&v| v == peak)?;
        if ip < 1 {
            return None;
        }
        let mut ext_x = x[..=ip].to_vec();
        let mut ext_y = y[..=ip].to_vec();
        for k in (0..ip).rev() {
            ext_x.push(2.0 * x[ip] - x[k]);
            ext_y.push(y[k]);
        }
        let (lo, hi) = half_max_crossings(&ext_x, &ext_y)?;
        Some(hi - lo)
    }
}

/// Transmitted fraction of `marginal` through `scan_filter` at evenly
/// spaced tilts.
pub fn spectrometer_scan(
    marginal: &Spectrum,
    scan_filter: &FilterSpec,
    tilt_range_deg: (f64, f64),
    n_steps: usize,
) -> Result<ScanTrace> {
    scan_filter.validate()?;
    if n_steps == 0 {
        return Err(Error::Empty("spectrometer scan with no steps".into()));
    }
    if !(tilt_range_deg.1 >= tilt_range_deg.0) {
        return Err(Error::invalid("tilt range must be non-decreasing"));
    }
    let tilts = linspace(tilt_range_deg.0, tilt_range_deg.1, n_steps);
    let points = tilts
        .iter()
        .map(|&t| {
            let f = scan_filter.clone().with_tilt(t)?;
            Ok(ScanPoint {
                tilt_deg: t,
                center_nm: f.tilt_tuned_center(),
                rate: marginal.transmitted_fraction(&f),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTrace { points })
}

/// Heralded photon's spectral density operator `ρ(λ, λ′)`.
///
/// Normalized so that `Σ_i ρ_ii Δλ = 1`; the matrix `ρ·Δλ` is the
/// density matrix in the orthonormal basis of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensityOp {
    pub axis_nm: Vec<f64>,
    pub matrix: DMatrix<Complex64>,
    pub purity: f64,
}

impl SpectralDensityOp {
    /// Build from an unnormalized Hermitian kernel.
    pub fn from_kernel(axis_nm: Vec<f64>, mut matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = axis_nm.len();
        if n < 2 || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::invalid("density operator size does not match its axis"));
        }
        let step = axis_nm[1] - axis_nm[0];
        let trace: f64 = (0..n).map(|i| matrix[(i, i)].re).sum::<f64>() * step;
        if !(trace > 0.0 && trace.is_finite()) {
            return Err(Error::ZeroOverlap("density operator has zero trace".into()));
        }
        matrix /= Complex64::new(trace, 0.0);
        let purity = matrix.iter().map(|v| v.norm_sqr()).sum::<f64>() * step * step;
        Ok(Self {
            axis_nm,
            matrix,
            purity,
        })
    }

    pub fn step(&self) -> f64 {
        self.axis_nm[1] - self.axis_nm[0]
    }

    pub fn trace(&self) -> f64 {
        (0..self.axis_nm.len()).map(|i| self.matrix[(i, i)].re).sum::<f64>() * self.step()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.axis_nm.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the density matrix `ρ·Δλ`, in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.matrix.scale(self.step());
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().cloned().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Diagonal as a spectrum.
    pub fn diagonal(&self) -> Spectrum {
        Spectrum {
            axis_nm: self.axis_nm.clone(),
            density: (0..self.axis_nm.len()).map(|i| self.matrix[(i, i)].re).collect(),
        }
    }

    /// State after passing a filter: `sqrt(T(λ)T(λ′))·ρ(λ, λ′)`, renormalized.
    pub fn filtered(&self, filter: &FilterSpec) -> Result<Self> {
        filter.validate()?;
        let step = self.step();
        let amp: Vec<f64> = self
            .axis_nm
            .iter()
            .map(|&l| filter.cell_transmission(l, step).sqrt())
            .collect();
        let n = amp.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.matrix[(i, j)] * (amp[i] * amp[j]));
        Self::from_kernel(self.axis_nm.clone(), m)
    }

    /// `⟨φ|ρ|φ⟩` for a unit-normalized mode on the same axis.
    pub fn expectation(&self, mode: &SpectralMode) -> Result<f64> {
        if mode.axis_nm != self.axis_nm {
            return Err(Error::invalid("mode and density operator use different axes"));
        }
        let n = self.axis_nm.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let ci = mode.amplitude[i].conj();
            if ci == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row: Complex64 = (0..n).map(|j| self.matrix[(i, j)] * mode.amplitude[j]).sum();
            acc += ci * row;
        }
        Ok(acc.re * self.step() * self.step())
    }
}

/// Heralded density operator conditioned on the trigger passing `trigger_filter`.
pub fn heralded_density_op(grid: &SpectralGrid, trigger_filter: &FilterSpec) -> Result<SpectralDensityOp> {
    trigger_filter.validate()?;
    let weights = grid.trigger_weights(Some(trigger_filter));
    let rows: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if rows.is_empty() {
        return Err(Error::ZeroOverlap("trigger filter misses the joint spectrum".into()));
    }
    let nh = grid.heralded_axis.len();
    let dt = grid.trigger_step();
    let m = DMatrix::from_fn(rows.len(), nh, |r, j| {
        grid.at(rows[r], j) * (weights[rows[r]] * dt).sqrt()
    });
    let kernel = m.transpose() * m.map(|v| v.conj());
    // kernel[(h, h')] = Σ_t f(t,h) conj(f(t,h')) T Δλ_t
    SpectralDensityOp::from_kernel(grid.heralded_axis.clone(), kernel)
}

/// A normalized single-mode spectral amplitude, `Σ|φ|² Δλ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMode {
    pub axis_nm: Vec<f64>,
    pub amplitude: Vec<Complex64>,
}

impl SpectralMode {
    pub fn from_amplitude(axis_nm: Vec<f64>, mut amplitude: Vec<Complex64>) -> Result<Self> {
        if axis_nm.len() < 2 || amplitude.len() != axis_nm.len() {
            return Err(Error::invalid("mode amplitude does not match its axis"));
        }
        let step = axis_nm[1] - axis_nm[0];
        let norm: f64 = amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * step;
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::ZeroOverlap("mode vanishes on the axis".into()));
        }
        let s = norm.sqrt();
        amplitude.iter_mut().for_each(|a| *a /= s);
        Ok(Self { axis_nm, amplitude })
    }

    /// Transform-limited pulse spectrum, optionally through a filter.
    pub fn coherent_pulse(pulse: &PumpPulse, filter: Option<&FilterSpec>, axis_nm: &[f64]) -> Result<Self> {
        pulse.validate()?;
        if axis_nm.len() < 2 {
            return Err(Error::invalid("mode axis needs ≥ 2 samples"));
        }
        let step = axis_nm[1] - axis_nm[0];
        let amp = axis_nm
            .iter()
            .map(|&l| pulse.spectral_amplitude(l) * filter.map_or(1.0, |f| f.cell_transmission(l, step).sqrt()))
            .collect();
        Self::from_amplitude(axis_nm.to_vec(), amp)
    }

    /// The mode delayed by `tau_fs`, `φ(ω) e^{iωτ}`.
    pub fn delayed(&self, tau_fs: f64) -> Self {
        let amplitude = self
            .axis_nm
            .iter()
            .zip(&self.amplitude)
            .map(|(&l, &a)| a * Complex64::from_polar(1.0, 2.0 * PI * C_NM_PER_FS / l * tau_fs))
            .collect();
        Self {
            axis_nm: self.axis_nm.clone(),
            amplitude,
        }
    }

    pub fn intensity(&self) -> Spectrum {
        Spectrum {
            axis_nm: self.axis_nm.clone(),
            density: self.amplitude.iter().map(|a| a.norm_sqr()).collect(),
        }
    }
}
