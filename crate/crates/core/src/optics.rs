//! Fiber-coupling acceptance geometry and interference-filter models.
//!
//! The collection optics image the pumped region of the crystal onto a
//! single-mode fiber. The fiber's fundamental mode is propagated back
//! through the lens to the crystal plane with the ABCD law, and a plane
//! wave leaving the pump spot at a tilt θ couples to that mode with the
//! Gaussian overlap
//!
//! ```text
//! η(θ)/η(0) = exp(−k² sin²θ · Re(1/a) / 2),   a = 1/w_p² + 1/w² + i k / (2R)
//! ```
//!
//! where `w_p` is the pump spot radius, `w` and `R` the back-propagated
//! mode radius and wavefront curvature, and `k = 2π/λ` in air. The
//! acceptance width is the full angular interval over which η stays
//! above `1/e²` of its peak.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ensure_finite_positive, normal_cdf};

/// Passband lineshape of an interference filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterShape {
    TopHat,
    Gaussian,
}

/// Interference bandpass filter with tilt tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub peak_transmission: f64,
    pub shape: FilterShape,
    #[serde(default)]
    pub tilt_deg: f64,
    #[serde(default = "default_effective_index")]
    pub effective_index: f64,
}

fn default_effective_index() -> f64 {
    2.0
}

impl FilterSpec {
    pub fn new(center_nm: f64, fwhm_nm: f64, peak_transmission: f64, shape: FilterShape) -> Result<Self> {
        let f = Self {
            center_nm,
            fwhm_nm,
            peak_transmission,
            shape,
            tilt_deg: 0.0,
            effective_index: default_effective_index(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn top_hat(center_nm: f64, fwhm_nm: f64, peak_transmission: f64) -> Result<Self> {
        Self::new(center_nm, fwhm_nm, peak_transmission, FilterShape::TopHat)
    }

    pub fn gaussian(center_nm: f64, fwhm_nm: f64, peak_transmission: f64) -> Result<Self> {
        Self::new(center_nm, fwhm_nm, peak_transmission, FilterShape::Gaussian)
    }

    pub fn with_tilt(mut self, tilt_deg: f64) -> Result<Self> {
        self.tilt_deg = tilt_deg;
        self.validate()?;
        Ok(self)
    }

    pub fn with_effective_index(mut self, n: f64) -> Result<Self> {
        self.effective_index = n;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite_positive("filter center_nm", self.center_nm)?;
        ensure_finite_positive("filter fwhm_nm", self.fwhm_nm)?;
        if !(self.peak_transmission > 0.0 && self.peak_transmission <= 1.0) {
            return Err(Error::invalid(format!(
                "filter peak_transmission must be in (0, 1], got {}",
                self.peak_transmission
            )));
        }
        if !(0.0..=45.0).contains(&self.tilt_deg) {
            return Err(Error::invalid(format!(
                "filter tilt_deg must be in [0, 45], got {}",
                self.tilt_deg
            )));
        }
        if !(self.effective_index.is_finite() && self.effective_index > 1.0) {
            return Err(Error::invalid(format!(
                "filter effective_index must exceed 1, got {}",
                self.effective_index
            )));
        }
        Ok(())
    }

    /// Passband center after tilting away from normal incidence:
    /// `λ' = λ₀ · sqrt(1 − sin²(tilt)/n_eff²)`.
    pub fn tilt_tuned_center(&self) -> f64 {
        let s = self.tilt_deg.to_radians().sin() / self.effective_index;
        self.center_nm * (1.0 - s * s).sqrt()
    }

    /// Nominal passband `[λ' − fwhm/2, λ' + fwhm/2]`.
    pub fn passband(&self) -> (f64, f64) {
        let c = self.tilt_tuned_center();
        (c - 0.5 * self.fwhm_nm, c + 0.5 * self.fwhm_nm)
    }

    fn gaussian_sigma(&self) -> f64 {
        self.fwhm_nm / (2.0 * (2.0 * 2f64.ln()).sqrt())
    }

    /// Transmission at a single wavelength.
    pub fn transmission(&self, lambda_nm: f64) -> f64 {
        let c = self.tilt_tuned_center();
        match self.shape {
            FilterShape::TopHat => {
                if (lambda_nm - c).abs() <= 0.5 * self.fwhm_nm {
                    self.peak_transmission
                } else {
                    0.0
                }
            }
            FilterShape::Gaussian => {
                let d = (lambda_nm - c) / self.fwhm_nm;
                self.peak_transmission * (-4.0 * 2f64.ln() * d * d).exp()
            }
        }
    }

    /// Mean transmission over the cell `[λ − width/2, λ + width/2]`.
    ///
    /// Grid sums use this instead of point sampling so that sharp filter
    /// edges do not snap to the nearest grid line.
    pub fn cell_transmission(&self, lambda_nm: f64, width_nm: f64) -> f64 {
        if width_nm <= 0.0 {
            return self.transmission(lambda_nm);
        }
        let (a, b) = (lambda_nm - 0.5 * width_nm, lambda_nm + 0.5 * width_nm);
        match self.shape {
            FilterShape::TopHat => {
                let (lo, hi) = self.passband();
                let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                self.peak_transmission * overlap / width_nm
            }
            FilterShape::Gaussian => {
                let c = self.tilt_tuned_center();
                let s = self.gaussian_sigma();
                let mass = normal_cdf((b - c) / s) - normal_cdf((a - c) / s);
                self.peak_transmission * mass * s * (2.0 * PI).sqrt() / width_nm
            }
        }
    }

    /// `∫ T(λ) dλ` over all wavelengths.
    pub fn integrated_transmission(&self) -> f64 {
        match self.shape {
            FilterShape::TopHat => self.peak_transmission * self.fwhm_nm,
            FilterShape::Gaussian => self.peak_transmission * self.gaussian_sigma() * (2.0 * PI).sqrt(),
        }
    }
}

/// Free-function form of [`FilterSpec::transmission`].
pub fn filter_transmission(filter: &FilterSpec, lambda_nm: f64) -> f64 {
    filter.transmission(lambda_nm)
}

/// Free-function form of [`FilterSpec::tilt_tuned_center`].
pub fn tilt_tuned_center(filter: &FilterSpec) -> f64 {
    filter.tilt_tuned_center()
}

/// Crystal-to-fiber imaging geometry of one collection arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionGeometry {
    pub lens_focal_length_mm: f64,
    pub crystal_to_lens_distance_cm: f64,
    pub fiber_mode_field_diameter_um: f64,
    /// 1/e² intensity diameter of the pump at the crystal.
    pub pump_spot_diameter_mm: f64,
    pub wavelength_nm: f64,
}

impl Default for CollectionGeometry {
    fn default() -> Self {
        Self {
            lens_focal_length_mm: 18.4,
            crystal_to_lens_distance_cm: 69.4,
            fiber_mode_field_diameter_um: 5.0,
            pump_spot_diameter_mm: 0.6,
            wavelength_nm: 780.0,
        }
    }
}

/// Fiber mode propagated back to the crystal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeAtCrystal {
    /// 1/e² intensity radius, µm.
    pub radius_um: f64,
    /// Wavefront radius of curvature, µm (infinite for a flat wavefront).
    pub curvature_radius_um: f64,
    /// Distance from lens to the fiber face, µm.
    pub fiber_distance_um: f64,
}

impl CollectionGeometry {
    pub fn validate(&self) -> Result<()> {
        ensure_finite_positive("lens_focal_length_mm", self.lens_focal_length_mm)?;
        ensure_finite_positive("crystal_to_lens_distance_cm", self.crystal_to_lens_distance_cm)?;
        ensure_finite_positive("fiber_mode_field_diameter_um", self.fiber_mode_field_diameter_um)?;
        ensure_finite_positive("pump_spot_diameter_mm", self.pump_spot_diameter_mm)?;
        ensure_finite_positive("wavelength_nm", self.wavelength_nm)?;
        Ok(())
    }

    fn object_distance_um(&self) -> f64 {
        self.crystal_to_lens_distance_cm * 1e4
    }

    fn focal_length_um(&self) -> f64 {
        self.lens_focal_length_mm * 1e3
    }

    /// Back-propagate the fiber mode at `lambda_nm` to the crystal.
    ///
    /// The fiber face sits at the geometric image of the crystal plane.
    pub fn back_propagated_mode(&self, lambda_nm: f64) -> Result<ModeAtCrystal> {
        self.validate()?;
        ensure_finite_positive("wavelength", lambda_nm)?;
        let f = self.focal_length_um();
        let d = self.object_distance_um();
        if d <= f {
            return Err(Error::invalid(format!(
                "no real back-propagated waist: crystal distance {d} µm does not exceed focal length {f} µm"
            )));
        }
        let lambda_um = lambda_nm * 1e-3;
        let d_img = f * d / (d - f);
        let w_fiber = 0.5 * self.fiber_mode_field_diameter_um;
        let z_r = PI * w_fiber * w_fiber / lambda_um;

        // q-parameter: fiber waist -> lens -> crystal.
        let mut q = Complex64::new(0.0, z_r) + d_img;
        q = 1.0 / (1.0 / q - 1.0 / f);
        q += d;
        let inv_q = 1.0 / q;
        if !(inv_q.im < 0.0) {
            return Err(Error::invalid("no real back-propagated waist"));
        }
        let radius = (-lambda_um / (PI * inv_q.im)).sqrt();
        let curvature = if inv_q.re == 0.0 { f64::INFINITY } else { 1.0 / inv_q.re };
        Ok(ModeAtCrystal {
            radius_um: radius,
            curvature_radius_um: curvature,
            fiber_distance_um: d_img,
        })
    }

    /// Closed-form coupling profile at one wavelength.
    pub fn coupling_profile(&self, lambda_nm: f64) -> Result<CouplingProfile> {
        let mode = self.back_propagated_mode(lambda_nm)?;
        let k = 2.0 * PI / (lambda_nm * 1e-3);
        let w_p = 0.5 * self.pump_spot_diameter_mm * 1e3;
        let a = Complex64::new(
            1.0 / (w_p * w_p) + 1.0 / (mode.radius_um * mode.radius_um),
            k / (2.0 * mode.curvature_radius_um),
        );
        Ok(CouplingProfile {
            wavenumber_per_um: k,
            re_inv_a: (1.0 / a).re,
            mode,
        })
    }
}

/// Angular coupling efficiency of one collection arm, relative to its peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingProfile {
    pub wavenumber_per_um: f64,
    /// `Re(1/a)` of the overlap exponent, µm².
    pub re_inv_a: f64,
    pub mode: ModeAtCrystal,
}

impl CouplingProfile {
    /// `η(θ)/η(0)` for a plane wave tilted by `tilt_rad` from the fiber axis.
    pub fn relative_efficiency(&self, tilt_rad: f64) -> f64 {
        let b = self.wavenumber_per_um * tilt_rad.sin();
        (-0.5 * b * b * self.re_inv_a).exp()
    }

    /// Amplitude weight `sqrt(η(θ)/η(0))`, unit at the fiber axis.
    pub fn amplitude_weight(&self, tilt_rad: f64) -> f64 {
        let b = self.wavenumber_per_um * tilt_rad.sin();
        (-0.25 * b * b * self.re_inv_a).exp()
    }

    /// Tilt at which the relative efficiency drops to `1/e²`, radians.
    pub fn half_width_rad(&self) -> f64 {
        let s = 2.0 / (self.wavenumber_per_um * self.re_inv_a.sqrt());
        s.min(1.0).asin()
    }
}

/// Full angular acceptance width (degrees) of the collection geometry at
/// its design wavelength, using the 1/e² overlap criterion.
pub fn acceptance_angle(geom: &CollectionGeometry) -> Result<f64> {
    let profile = geom.coupling_profile(geom.wavelength_nm)?;
    Ok(2.0 * profile.half_width_rad().to_degrees())
}
