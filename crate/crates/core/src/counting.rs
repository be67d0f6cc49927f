//! Heralding-efficiency budget and Monte Carlo coincidence counting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ensure_finite_positive;
use crate::optics::FilterSpec;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetEntry {
    pub label: String,
    pub transmission: f64,
}

/// Ordered, labelled transmissions of the heralded-photon analysis path.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    pub entries: Vec<BudgetEntry>,
}

impl LossBudget {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let b = Self {
            entries: entries
                .into_iter()
                .map(|(label, transmission)| BudgetEntry {
                    label: label.into(),
                    transmission,
                })
                .collect(),
        };
        b.validate()?;
        Ok(b)
    }

    /// Detector, F2, fiber-exit reflection and lens surfaces.
    pub fn reference() -> Self {
        Self::new([
            ("detector D2 efficiency", 0.63),
            ("filter F2 transmission", 0.63),
            ("fiber B exit reflection", 0.96),
            ("anti-reflection coated surfaces", 0.98),
        ])
        .expect("default budget is valid")
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if !(e.transmission > 0.0 && e.transmission <= 1.0) {
                return Err(Error::invalid(format!(
                    "budget entry `{}`: transmission {} outside (0, 1]",
                    e.label, e.transmission
                )));
            }
        }
        Ok(())
    }

    pub fn product(&self) -> f64 {
        self.entries.iter().map(|e| e.transmission).product()
    }

    /// Budget without the entries whose label matches `label`.
    pub fn without(&self, label: &str) -> Self {
        Self {
            entries: self.entries.iter().filter(|e| e.label != label).cloned().collect(),
        }
    }
}

/// `η_D = R_c / R_1`.
pub fn conditional_efficiency(coincidence_rate: f64, trigger_rate: f64) -> Result<f64> {
    ensure_finite_positive("trigger rate", trigger_rate)?;
    if !(coincidence_rate >= 0.0) {
        return Err(Error::invalid(format!(
            "coincidence rate must be non-negative, got {coincidence_rate}"
        )));
    }
    if coincidence_rate > trigger_rate {
        return Err(Error::invalid(format!(
            "coincidence rate {coincidence_rate} exceeds trigger rate {trigger_rate}"
        )));
    }
    Ok(coincidence_rate / trigger_rate)
}

/// `H = η_D / Π T_i`.
pub fn heralding_efficiency(eta_d: f64, budget: &LossBudget) -> Result<f64> {
    budget.validate()?;
    if !(0.0..=1.0).contains(&eta_d) {
        return Err(Error::invalid(format!("η_D must lie in [0, 1], got {eta_d}")));
    }
    let product = budget.product();
    if eta_d > product {
        return Err(Error::SuperUnityHeralding {
            eta_d,
            budget_product: product,
        });
    }
    Ok(eta_d / product)
}

pub const PREDICTED_EFFICIENCY_FORMULA: &str =
    "eta_D = coupling * T_F2,peak * (integral S(l) T_F2(l) dl / T_F2,peak) * product(non-filter budget)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedEfficiency {
    pub value: f64,
    /// Fraction of the heralded spectrum inside the F2 passband, relative
    /// to F2's peak transmission.
    pub spectral_acceptance: f64,
    pub peak_transmission: f64,
    pub budget_product: f64,
    pub coupling: f64,
    pub formula: &'static str,
}

/// Conditional detection efficiency expected for a heralded spectrum
/// passing the analysis filter `f2`.
pub fn predicted_conditional_efficiency(
    marginal: &Spectrum,
    f2: &FilterSpec,
    budget_nonfilter: &LossBudget,
    coupling: f64,
) -> Result<PredictedEfficiency> {
    f2.validate()?;
    budget_nonfilter.validate()?;
    if !(0.0..=1.0).contains(&coupling) {
        return Err(Error::invalid(format!("coupling must lie in [0, 1], got {coupling}")));
    }
    let integral = marginal.integral();
    if (integral - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("marginal integrates to {integral}, expected 1")));
    }
    let acceptance = marginal.transmitted_fraction(f2) / f2.peak_transmission;
    let product = budget_nonfilter.product();
    Ok(PredictedEfficiency {
        value: coupling * f2.peak_transmission * acceptance * product,
        spectral_acceptance: acceptance,
        peak_transmission: f2.peak_transmission,
        budget_product: product,
        coupling,
        formula: PREDICTED_EFFICIENCY_FORMULA,
    })
}

/// Pulsed pair source with two lossy detection paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    pub repetition_rate_mhz: f64,
    pub pair_probability_per_pulse: f64,
    pub trigger_path_transmission: f64,
    pub heralded_path_transmission: f64,
    pub dark_rate_per_detector_hz: f64,
    pub coincidence_window_ns: f64,
    /// Pulse offset used for the delayed-window accidental estimate.
    #[serde(default = "default_accidental_delay")]
    pub accidental_delay_pulses: u32,
}

fn default_accidental_delay() -> u32 {
    8
}

impl Default for SourceModel {
    /// Calibrated so that `R_1 = 3068 Hz` and `η_D = 949/3068`.
    fn default() -> Self {
        Self {
            repetition_rate_mhz: 76.0,
            pair_probability_per_pulse: 8.08e-4,
            trigger_path_transmission: 0.05,
            heralded_path_transmission: 949.0 / 3068.0,
            dark_rate_per_detector_hz: 0.0,
            coincidence_window_ns: 5.0,
            accidental_delay_pulses: default_accidental_delay(),
        }
    }
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        ensure_finite_positive("repetition_rate_mhz", self.repetition_rate_mhz)?;
        ensure_finite_positive("coincidence_window_ns", self.coincidence_window_ns)?;
        for (name, p) in [
            ("pair_probability_per_pulse", self.pair_probability_per_pulse),
            ("trigger_path_transmission", self.trigger_path_transmission),
            ("heralded_path_transmission", self.heralded_path_transmission),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.dark_rate_per_detector_hz >= 0.0 && self.dark_rate_per_detector_hz.is_finite()) {
            return Err(Error::invalid("dark_rate_per_detector_hz must be finite and non-negative"));
        }
        if self.accidental_delay_pulses == 0 {
            return Err(Error::invalid("accidental_delay_pulses must be at least 1"));
        }
        Ok(())
    }

    pub fn pulse_period_s(&self) -> f64 {
        1e-6 / self.repetition_rate_mhz
    }

    /// Expected trigger rate, Hz.
    pub fn expected_trigger_rate(&self) -> f64 {
        self.repetition_rate_mhz * 1e6 * self.pair_probability_per_pulse * self.trigger_path_transmission
            + self.dark_rate_per_detector_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub duration_s: f64,
    pub pulses: u64,
    pub trigger_counts: u64,
    pub heralded_counts: u64,
    pub coincidences: u64,
    pub accidental_estimate: u64,
    pub seed: u64,
}

impl CountRecord {
    pub fn trigger_rate(&self) -> f64 {
        self.trigger_counts as f64 / self.duration_s
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.coincidences as f64 / self.duration_s
    }

    pub fn conditional_efficiency(&self) -> Result<f64> {
        if self.trigger_counts == 0 {
            return Err(Error::Empty("no trigger counts".into()));
        }
        Ok(self.coincidences as f64 / self.trigger_counts as f64)
    }
}

/// Sorted detection times of one detector, in units of the pulse period.
fn detections(pair_slots: &[u64], transmission: f64, dark_rate_per_period: f64, pulses: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut t: Vec<f64> = pair_slots
        .iter()
        .filter(|_| rng.random::<f64>() < transmission)
        .map(|&k| k as f64)
        .collect();
    if dark_rate_per_period > 0.0 {
        let gap = Exp::new(dark_rate_per_period).expect("positive rate");
        let mut x = gap.sample(rng);
        let end = pulses as f64;
        while x < end {
            t.push(x);
            x += gap.sample(rng);
        }
        t.sort_by(|a, b| a.total_cmp(b));
    }
    t
}

/// One-to-one matches of `b` events within `half_window` of `a + offset`.
fn count_matches(a: &[f64], b: &[f64], offset: f64, half_window: f64) -> u64 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        let d = b[j] - (a[i] + offset);
        if d < -half_window {
            j += 1;
        } else if d > half_window {
            i += 1;
        } else {
            n += 1;
            i += 1;
            j += 1;
        }
    }
    n
}

/// Simulate a counting run of `duration_s` seconds.
///
/// Pairs are created per pulse with the model probability (at most one
/// pair per pulse), each photon survives its path independently, and dark
/// counts arrive as a Poisson process. A coincidence is a trigger and a
/// heralded detection within half a window of each other; the accidental
/// estimate repeats the count with the heralded channel delayed by
/// `accidental_delay_pulses` pulse periods.
pub fn simulate_counts(model: &SourceModel, duration_s: f64, seed: u64) -> Result<CountRecord> {
    model.validate()?;
    ensure_finite_positive("duration_s", duration_s)?;
    let pulses = (model.repetition_rate_mhz * 1e6 * duration_s).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pair_slots = Vec::new();
    let p = model.pair_probability_per_pulse;
    if p >= 1.0 {
        pair_slots.extend(0..pulses);
    } else if p > 0.0 {
        // Gap to the next pair pulse counts the failures before it.
        let gaps = Geometric::new(p).expect("probability in (0, 1)");
        let mut k = gaps.sample(&mut rng);
        while k < pulses {
            pair_slots.push(k);
            k = k.saturating_add(1).saturating_add(gaps.sample(&mut rng));
        }
    }

    let dark = model.dark_rate_per_detector_hz * model.pulse_period_s();
    let trig = detections(&pair_slots, model.trigger_path_transmission, dark, pulses, &mut rng);
    let her = detections(&pair_slots, model.heralded_path_transmission, dark, pulses, &mut rng);
    let half = 0.5 * model.coincidence_window_ns * 1e-9 / model.pulse_period_s();
    Ok(CountRecord {
        duration_s,
        pulses,
        trigger_counts: trig.len() as u64,
        heralded_counts: her.len() as u64,
        coincidences: count_matches(&trig, &her, 0.0, half),
        accidental_estimate: count_matches(&trig, &her, model.accidental_delay_pulses as f64, half),
        seed,
    })
}
