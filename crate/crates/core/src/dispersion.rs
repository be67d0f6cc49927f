//! Refractive indices of a negative uniaxial crystal (BBO) from
//! four-term Sellmeier formulae.
//!
//! Each principal index follows
//!
//! ```text
//! n²(λ) = A + B / (λ² − C) − D·λ²      (λ in µm)
//! ```
//!
//! Wavelengths at the API boundary are vacuum wavelengths in nm.
//! Evaluation outside a set's valid range is an error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default wavelength range over which a coefficient set is trusted, nm.
pub const DEFAULT_VALID_RANGE_NM: (f64, f64) = (200.0, 1100.0);

/// Identifier of the shipped default coefficient set.
pub const DEFAULT_SET_ID: &str = "bbo-eimerl-1987";

/// Coefficients `(A, B, C, D)` of `n² = A + B/(λ² − C) − D·λ²`, λ in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SellmeierCoeffs {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    fn index_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a + self.b / (l2 - self.c) - self.d * l2
    }
}

/// A named pair of ordinary/extraordinary Sellmeier coefficient sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SellmeierSet {
    pub id: String,
    pub ordinary: SellmeierCoeffs,
    pub extraordinary: SellmeierCoeffs,
    /// Inclusive valid wavelength interval, nm.
    pub valid_range_nm: (f64, f64),
}

impl Default for SellmeierSet {
    fn default() -> Self {
        Self::eimerl_1987()
    }
}

impl SellmeierSet {
    /// Eimerl et al. (J. Appl. Phys. 62, 1968, 1987) BBO coefficients.
    pub fn eimerl_1987() -> Self {
        Self {
            id: DEFAULT_SET_ID.to_string(),
            ordinary: SellmeierCoeffs::new(2.7359, 0.01878, 0.01822, 0.01354),
            extraordinary: SellmeierCoeffs::new(2.3753, 0.01224, 0.01667, 0.01516),
            valid_range_nm: DEFAULT_VALID_RANGE_NM,
        }
    }

    /// Kato (IEEE J. Quantum Electron. 22, 1013, 1986) BBO coefficients.
    pub fn kato_1986() -> Self {
        Self {
            id: "bbo-kato-1986".to_string(),
            ordinary: SellmeierCoeffs::new(2.7405, 0.0184, 0.0179, 0.0155),
            extraordinary: SellmeierCoeffs::new(2.3730, 0.0128, 0.0156, 0.0044),
            valid_range_nm: DEFAULT_VALID_RANGE_NM,
        }
    }

    /// Look up one of the shipped sets by id.
    pub fn builtin(id: &str) -> Option<Self> {
        [Self::eimerl_1987(), Self::kato_1986()]
            .into_iter()
            .find(|s| s.id == id)
    }

    pub fn builtin_ids() -> Vec<String> {
        vec![Self::eimerl_1987().id, Self::kato_1986().id]
    }

    /// Check the set is usable: finite coefficients, no pole inside the
    /// valid range and `n_o > n_e > 1` throughout it (sampled every nm).
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.valid_range_nm;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(Error::invalid(format!(
                "set `{}`: invalid valid_range_nm ({lo}, {hi})",
                self.id
            )));
        }
        for c in [&self.ordinary, &self.extraordinary] {
            if ![c.a, c.b, c.c, c.d].iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("set `{}`: non-finite coefficient", self.id)));
            }
            let lo_um2 = (lo / 1000.0).powi(2);
            let hi_um2 = (hi / 1000.0).powi(2);
            if c.c >= lo_um2 && c.c <= hi_um2 {
                return Err(Error::invalid(format!(
                    "set `{}`: Sellmeier pole inside valid range",
                    self.id
                )));
            }
        }
        let steps = ((hi - lo).ceil() as usize).max(1);
        for i in 0..=steps {
            let lambda = (lo + i as f64).min(hi);
            let no2 = self.ordinary.index_squared(lambda / 1000.0);
            let ne2 = self.extraordinary.index_squared(lambda / 1000.0);
            if !(no2 > ne2 && ne2 > 1.0) {
                return Err(Error::invalid(format!(
                    "set `{}`: n_o > n_e > 1 violated at {lambda} nm",
                    self.id
                )));
            }
        }
        Ok(())
    }

    fn check_range(&self, lambda_nm: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_nm;
        if lambda_nm.is_finite() && lambda_nm >= lo && lambda_nm <= hi {
            Ok(())
        } else {
            Err(Error::WavelengthOutOfRange {
                set: self.id.clone(),
                wavelength_nm: lambda_nm,
                min_nm: lo,
                max_nm: hi,
            })
        }
    }

    pub fn contains(&self, lambda_nm: f64) -> bool {
        self.check_range(lambda_nm).is_ok()
    }

    /// Ordinary index `n_o(λ)`.
    pub fn index_ordinary(&self, lambda_nm: f64) -> Result<f64> {
        self.check_range(lambda_nm)?;
        Ok(self.ordinary.index_squared(lambda_nm / 1000.0).sqrt())
    }

    /// Principal extraordinary index `n_e(λ)` (propagation normal to the optic axis).
    pub fn index_principal_extraordinary(&self, lambda_nm: f64) -> Result<f64> {
        self.check_range(lambda_nm)?;
        Ok(self.extraordinary.index_squared(lambda_nm / 1000.0).sqrt())
    }

    /// Extraordinary-wave index for propagation at `theta` (radians) from
    /// the optic axis, from the index ellipse
    /// `1/n(θ)² = cos²θ/n_o² + sin²θ/n_e²`.
    pub fn index_extraordinary(&self, lambda_nm: f64, theta: f64) -> Result<f64> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::invalid(format!(
                "propagation angle {theta} rad outside [0, π/2]"
            )));
        }
        let no = self.index_ordinary(lambda_nm)?;
        let ne = self.index_principal_extraordinary(lambda_nm)?;
        let (s, c) = theta.sin_cos();
        Ok(1.0 / ((c * c) / (no * no) + (s * s) / (ne * ne)).sqrt())
    }
}
