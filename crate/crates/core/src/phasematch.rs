//! Type-I (e → o + o) noncollinear phase matching in a uniaxial crystal.
//!
//! The pump is a plane wave along the lab axis and sees the extraordinary
//! index at the crystal cut angle. Both down-converted photons are
//! ordinary waves. For a fixed wavelength triple the matching condition
//! `k_p = k_t + k_h` closes a triangle, so the internal emission angles
//! follow from the law of cosines; external angles come from Snell's law
//! at an exit face normal to the pump.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::SellmeierSet;
use crate::error::{Error, Result};
use crate::numeric::{bisect, ensure_finite_positive, linspace};
use crate::optics::FilterSpec;

pub const INTERACTION: &str = "type-I e->oo";

/// Bracket (degrees) searched by [`solve_degenerate_cut_angle`].
pub const CUT_ANGLE_BRACKET_DEG: (f64, f64) = (20.0, 40.0);

/// Cut angle (degrees) that puts degenerate 780 nm pairs from a 390 nm
/// pump at an external cone angle of 4.5° with the default Eimerl set.
/// Reproduced by `solve_degenerate_cut_angle(390.0, 4.5, &default)`.
pub const CALIBRATED_CUT_ANGLE_DEG: f64 = 30.859_628_547_838;

/// Crystal orientation and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalCut {
    /// Angle between optic axis and pump propagation, degrees.
    pub cut_angle_deg: f64,
    pub thickness_mm: f64,
}

impl CrystalCut {
    pub fn new(cut_angle_deg: f64, thickness_mm: f64) -> Result<Self> {
        let c = Self {
            cut_angle_deg,
            thickness_mm,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cut_angle_deg > 0.0 && self.cut_angle_deg < 90.0) {
            return Err(Error::invalid(format!(
                "cut angle must lie in (0°, 90°), got {}",
                self.cut_angle_deg
            )));
        }
        ensure_finite_positive("crystal thickness_mm", self.thickness_mm)
    }

    pub fn interaction(&self) -> &'static str {
        INTERACTION
    }

    pub fn thickness_um(&self) -> f64 {
        self.thickness_mm * 1e3
    }
}

/// Hard angular acceptance window around the fiber axis (external angles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceWindow {
    pub center_deg: f64,
    pub half_width_deg: f64,
}

impl Default for AcceptanceWindow {
    fn default() -> Self {
        Self {
            center_deg: 4.5,
            half_width_deg: 0.15,
        }
    }
}

impl AcceptanceWindow {
    pub fn new(center_deg: f64, half_width_deg: f64) -> Result<Self> {
        let w = Self {
            center_deg,
            half_width_deg,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite_positive("window half_width_deg", self.half_width_deg)?;
        if !(self.center_deg > self.half_width_deg && self.center_deg < 90.0) {
            return Err(Error::invalid(format!(
                "window center {}° must exceed its half width {}°",
                self.center_deg, self.half_width_deg
            )));
        }
        Ok(())
    }

    pub fn contains(&self, angle_deg: f64) -> bool {
        (angle_deg - self.center_deg).abs() <= self.half_width_deg
    }
}

/// Heralded wavelength fixed by energy conservation,
/// `1/λ_h = 1/λ_p − 1/λ_t`.
pub fn conjugate_wavelength(pump_nm: f64, trigger_nm: f64) -> Result<f64> {
    ensure_finite_positive("pump wavelength", pump_nm)?;
    ensure_finite_positive("trigger wavelength", trigger_nm)?;
    if trigger_nm <= pump_nm {
        return Err(Error::invalid(format!(
            "trigger wavelength {trigger_nm} nm must exceed pump wavelength {pump_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / trigger_nm))
}

/// Wavenumber `2π n / λ` in rad/µm.
pub(crate) fn wavenumber(index: f64, lambda_nm: f64) -> f64 {
    2.0 * PI * index / (lambda_nm * 1e-3)
}

/// Pump wavenumber (rad/µm) for the extraordinary pump at the cut angle.
pub(crate) fn pump_wavenumber(pump_nm: f64, cut: &CrystalCut, set: &SellmeierSet) -> Result<f64> {
    let n = set.index_extraordinary(pump_nm, cut.cut_angle_deg.to_radians())?;
    Ok(wavenumber(n, pump_nm))
}

/// Solution of the matching triangle for one wavelength triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmissionAngles {
    pub pump_nm: f64,
    pub trigger_nm: f64,
    pub heralded_nm: f64,
    pub trigger_internal_deg: f64,
    pub heralded_internal_deg: f64,
    pub trigger_external_deg: f64,
    pub heralded_external_deg: f64,
}

impl EmissionAngles {
    /// Transverse and longitudinal wavevector mismatch (rad/µm).
    pub fn residuals(&self, cut: &CrystalCut, set: &SellmeierSet) -> Result<(f64, f64)> {
        let kp = pump_wavenumber(self.pump_nm, cut, set)?;
        let kt = wavenumber(set.index_ordinary(self.trigger_nm)?, self.trigger_nm);
        let kh = wavenumber(set.index_ordinary(self.heralded_nm)?, self.heralded_nm);
        let (tt, th) = (
            self.trigger_internal_deg.to_radians(),
            self.heralded_internal_deg.to_radians(),
        );
        let transverse = kt * tt.sin() - kh * th.sin();
        let longitudinal = kp - kt * tt.cos() - kh * th.cos();
        Ok((transverse, longitudinal))
    }
}

/// Internal and external emission angles of a down-converted pair.
///
/// A conjugate wavelength outside the dispersion range, or wavevector
/// magnitudes that cannot close the matching triangle, yield
/// [`Error::NotPhaseMatchable`].
pub fn solve_emission_angles(
    pump_nm: f64,
    trigger_nm: f64,
    cut: &CrystalCut,
    set: &SellmeierSet,
) -> Result<EmissionAngles> {
    cut.validate()?;
    let heralded_nm = conjugate_wavelength(pump_nm, trigger_nm)?;
    let kp = pump_wavenumber(pump_nm, cut, set)?;
    let n_t = set.index_ordinary(trigger_nm)?;
    if !set.contains(heralded_nm) {
        return Err(Error::NotPhaseMatchable(format!(
            "conjugate wavelength {heralded_nm:.1} nm outside dispersion range of `{}`",
            set.id
        )));
    }
    let n_h = set.index_ordinary(heralded_nm)?;
    let kt = wavenumber(n_t, trigger_nm);
    let kh = wavenumber(n_h, heralded_nm);

    let cos_t = (kp * kp + kt * kt - kh * kh) / (2.0 * kp * kt);
    let cos_h = (kp * kp + kh * kh - kt * kt) / (2.0 * kp * kh);
    if !(cos_t.abs() <= 1.0 && cos_h.abs() <= 1.0) {
        return Err(Error::NotPhaseMatchable(format!(
            "λ_p = {pump_nm} nm, λ_t = {trigger_nm} nm: |k_t| + |k_h| cannot close on k_p"
        )));
    }
    let (tt, th) = (cos_t.acos(), cos_h.acos());
    let (st, sh) = (n_t * tt.sin(), n_h * th.sin());
    if st > 1.0 || sh > 1.0 {
        return Err(Error::NotPhaseMatchable(
            "emission angle beyond total internal reflection at exit face".into(),
        ));
    }
    Ok(EmissionAngles {
        pump_nm,
        trigger_nm,
        heralded_nm,
        trigger_internal_deg: tt.to_degrees(),
        heralded_internal_deg: th.to_degrees(),
        trigger_external_deg: st.asin().to_degrees(),
        heralded_external_deg: sh.asin().to_degrees(),
    })
}

/// External degenerate cone angle, extended by zero below the collinear
/// cut where the matching triangle cannot close.
fn degenerate_cone_angle(pump_nm: f64, cut_deg: f64, set: &SellmeierSet) -> Result<f64> {
    let cut = CrystalCut {
        cut_angle_deg: cut_deg,
        thickness_mm: 1.0,
    };
    match solve_emission_angles(pump_nm, 2.0 * pump_nm, &cut, set) {
        Ok(a) => Ok(a.trigger_external_deg),
        Err(Error::NotPhaseMatchable(_)) => {
            let kp = pump_wavenumber(pump_nm, &cut, set)?;
            let k = wavenumber(set.index_ordinary(2.0 * pump_nm)?, 2.0 * pump_nm);
            if kp >= 2.0 * k {
                Ok(0.0)
            } else {
                Ok(90.0)
            }
        }
        Err(e) => Err(e),
    }
}

/// Cut angle (degrees) at which degenerate pairs (`λ_t = λ_h = 2λ_p`)
/// leave the crystal at `target_external_deg`, by bisection over
/// [`CUT_ANGLE_BRACKET_DEG`].
pub fn solve_degenerate_cut_angle(pump_nm: f64, target_external_deg: f64, set: &SellmeierSet) -> Result<f64> {
    if !(target_external_deg > 0.0 && target_external_deg < 20.0) {
        return Err(Error::invalid(format!(
            "target cone angle must lie in (0°, 20°), got {target_external_deg}"
        )));
    }
    set.index_ordinary(pump_nm)?;
    set.index_ordinary(2.0 * pump_nm)?;
    let (lo, hi) = CUT_ANGLE_BRACKET_DEG;
    bisect(
        |cut| Ok(degenerate_cone_angle(pump_nm, cut, set)? - target_external_deg),
        lo,
        hi,
        1e-12,
        1e-10,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub signal_nm: f64,
    pub external_deg: f64,
    pub internal_deg: f64,
}

/// External emission angle versus wavelength at one pump wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub pump_nm: f64,
    pub cut_angle_deg: f64,
    pub set_id: String,
    pub points: Vec<TuningPoint>,
    /// Samples dropped because they are not phase-matchable.
    pub omitted: usize,
}

impl TuningCurve {
    /// Linear interpolation of the external angle at `signal_nm`.
    pub fn external_angle_at(&self, signal_nm: f64) -> Option<f64> {
        self.points.windows(2).find_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            if signal_nm >= a.signal_nm && signal_nm <= b.signal_nm {
                let t = (signal_nm - a.signal_nm) / (b.signal_nm - a.signal_nm);
                Some(a.external_deg + t * (b.external_deg - a.external_deg))
            } else {
                None
            }
        })
    }
}

pub fn tuning_curve(
    pump_nm: f64,
    cut: &CrystalCut,
    range_nm: (f64, f64),
    n_samples: usize,
    set: &SellmeierSet,
) -> Result<TuningCurve> {
    if n_samples < 2 {
        return Err(Error::invalid("tuning curve needs at least 2 samples"));
    }
    if !(range_nm.1 > range_nm.0) {
        return Err(Error::invalid("tuning curve range must be increasing"));
    }
    set.index_ordinary(range_nm.0)?;
    set.index_ordinary(range_nm.1)?;
    let samples = linspace(range_nm.0, range_nm.1, n_samples);
    let solved: Vec<Result<EmissionAngles>> = samples
        .par_iter()
        .map(|&l| solve_emission_angles(pump_nm, l, cut, set))
        .collect();
    let mut points = Vec::with_capacity(n_samples);
    let mut omitted = 0;
    for r in solved {
        match r {
            Ok(a) => points.push(TuningPoint {
                signal_nm: a.trigger_nm,
                external_deg: a.trigger_external_deg,
                internal_deg: a.trigger_internal_deg,
            }),
            Err(Error::NotPhaseMatchable(_)) => omitted += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::Empty(format!(
            "no phase-matchable sample in [{}, {}] nm at pump {pump_nm} nm",
            range_nm.0, range_nm.1
        )));
    }
    Ok(TuningCurve {
        pump_nm,
        cut_angle_deg: cut.cut_angle_deg,
        set_id: set.id.clone(),
        points,
        omitted,
    })
}

/// Sampling density of [`accepted_photon_set`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceGrid {
    pub pump_samples: usize,
    pub trigger_samples: usize,
}

impl Default for AcceptanceGrid {
    fn default() -> Self {
        Self {
            pump_samples: 201,
            trigger_samples: 201,
        }
    }
}

/// A `(λ_p, λ_t, λ_h)` triple whose two photons both land in the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptedTriple {
    pub pump_nm: f64,
    pub trigger_nm: f64,
    pub heralded_nm: f64,
    pub trigger_external_deg: f64,
    pub heralded_external_deg: f64,
}

/// Bounding intervals of the accepted photon set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptedSet {
    pub heralded_nm: (f64, f64),
    pub heralded_angle_deg: (f64, f64),
    pub trigger_nm: (f64, f64),
    pub count: usize,
}

impl AcceptedSet {
    pub fn heralded_width_nm(&self) -> f64 {
        self.heralded_nm.1 - self.heralded_nm.0
    }
}

fn sample_interval(range: (f64, f64), n: usize) -> Vec<f64> {
    if range.0 == range.1 {
        vec![range.0]
    } else {
        linspace(range.0, range.1, n)
    }
}

/// Every grid triple accepted by the trigger filter passband and the
/// angular window on both arms.
pub fn accepted_triples(
    pump_range_nm: (f64, f64),
    trigger_filter: &FilterSpec,
    window: &AcceptanceWindow,
    cut: &CrystalCut,
    set: &SellmeierSet,
    grid: AcceptanceGrid,
) -> Result<Vec<AcceptedTriple>> {
    trigger_filter.validate()?;
    window.validate()?;
    if !(pump_range_nm.1 >= pump_range_nm.0) || !pump_range_nm.0.is_finite() {
        return Err(Error::invalid("pump range must be a non-empty interval"));
    }
    if grid.pump_samples < 1 || grid.trigger_samples < 2 {
        return Err(Error::invalid("acceptance grid too coarse"));
    }
    let pumps = sample_interval(pump_range_nm, grid.pump_samples);
    let triggers = linspace(trigger_filter.passband().0, trigger_filter.passband().1, grid.trigger_samples);
    let rows: Vec<Result<Vec<AcceptedTriple>>> = pumps
        .par_iter()
        .map(|&lp| {
            let mut row = Vec::new();
            for &lt in &triggers {
                match solve_emission_angles(lp, lt, cut, set) {
                    Ok(a) => {
                        if window.contains(a.trigger_external_deg) && window.contains(a.heralded_external_deg) {
                            row.push(AcceptedTriple {
                                pump_nm: lp,
                                trigger_nm: lt,
                                heralded_nm: a.heralded_nm,
                                trigger_external_deg: a.trigger_external_deg,
                                heralded_external_deg: a.heralded_external_deg,
                            });
                        }
                    }
                    Err(Error::NotPhaseMatchable(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(row)
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Bounding heralded-wavelength and angle intervals reachable when the
/// pump spans `pump_range_nm`, the trigger passes `trigger_filter` and
/// both photons fall inside `window`.
pub fn accepted_photon_set(
    pump_range_nm: (f64, f64),
    trigger_filter: &FilterSpec,
    window: &AcceptanceWindow,
    cut: &CrystalCut,
    set: &SellmeierSet,
    grid: AcceptanceGrid,
) -> Result<AcceptedSet> {
    let triples = accepted_triples(pump_range_nm, trigger_filter, window, cut, set, grid)?;
    if triples.is_empty() {
        return Err(Error::Empty("no accepted photon pair".into()));
    }
    let bounds = |f: &dyn Fn(&AcceptedTriple) -> f64| {
        triples
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    Ok(AcceptedSet {
        heralded_nm: bounds(&|t| t.heralded_nm),
        heralded_angle_deg: bounds(&|t| t.heralded_external_deg),
        trigger_nm: bounds(&|t| t.trigger_nm),
        count: triples.len(),
    })
}

/// Trigger wavelengths whose external angle lies in the window when no
/// trigger filter is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawBandwidth {
    pub lower_nm: f64,
    pub upper_nm: f64,
    /// Total length of the accepted sub-intervals (the window can split
    /// the accepted band where the tuning curve dips below it).
    pub covered_nm: f64,
}

impl RawBandwidth {
    pub fn extent_nm(&self) -> f64 {
        self.upper_nm - self.lower_nm
    }
}

pub fn raw_trigger_bandwidth(
    pump_nm: f64,
    cut: &CrystalCut,
    window: &AcceptanceWindow,
    range_nm: (f64, f64),
    n_samples: usize,
    set: &SellmeierSet,
) -> Result<RawBandwidth> {
    let curve = tuning_curve(pump_nm, cut, range_nm, n_samples, set)?;
    let step = (range_nm.1 - range_nm.0) / (n_samples - 1) as f64;
    let inside: Vec<f64> = curve
        .points
        .iter()
        .filter(|p| window.contains(p.external_deg))
        .map(|p| p.signal_nm)
        .collect();
    if inside.is_empty() {
        return Err(Error::Empty("no trigger wavelength inside the window".into()));
    }
    Ok(RawBandwidth {
        lower_nm: inside[0],
        upper_nm: inside[inside.len() - 1],
        covered_nm: inside.len() as f64 * step,
    })
}
