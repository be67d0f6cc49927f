//! Property suites shared by the `properties` and `acceptance` targets.

use herald::counting::{simulate_counts, LossBudget, SourceModel};
use herald::dispersion::SellmeierSet;
use herald::interference::{fit_gaussian_dip, DelayUnit, DipKind, DipTrace};
use herald::numeric::linspace;
use herald::optics::{CollectionGeometry, FilterShape, FilterSpec};
use herald::phasematch::{solve_emission_angles, AcceptanceWindow, CrystalCut, CALIBRATED_CUT_ANGLE_DEG};
use herald::spectrum::{build_joint_spectrum, heralded_density_op, GridSpec, PumpPulse, SpectralGrid};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub type Suite = fn(bool) -> Result<(), String>;

/// Every suite with its name. The flag selects a fixed RNG seed.
pub const SUITES: &[(&str, Suite)] = &[
    ("dispersion sandwich", extraordinary_index_is_sandwiched),
    ("dispersion monotonic in wavelength", indices_fall_with_wavelength),
    ("dispersion monotonic in angle", extraordinary_index_falls_with_angle),
    ("energy conservation", emission_conserves_energy),
    ("budget permutation invariance", budget_product_ignores_order),
    ("filter integration", filters_integrate_to_peak_times_width),
    ("tilt tuning monotone", tilt_tunes_blueward),
    ("fit scale invariance", fit_ignores_count_scale),
    ("Monte Carlo seed determinism", monte_carlo_is_seed_deterministic),
    ("accidentals linear in window", accidentals_scale_with_window),
    ("grid normalization and exchange symmetry", joint_spectrum_normalized_and_exchange_symmetric),
    ("density operator Hermitian and positive", density_operator_is_a_state),
];

fn runner(cases: u32, deterministic: bool) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    if deterministic {
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
    } else {
        TestRunner::new(config)
    }
}

fn check<S: Strategy>(
    cases: u32,
    deterministic: bool,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases, deterministic).run(&strategy, test).map_err(|e| e.to_string())
}

fn sets() -> impl Strategy<Value = SellmeierSet> {
    prop_oneof![Just(SellmeierSet::eimerl_1987()), Just(SellmeierSet::kato_1986())]
}

fn cut() -> CrystalCut {
    CrystalCut::new(CALIBRATED_CUT_ANGLE_DEG, 0.7).unwrap()
}

fn grid_for(duration_fs: f64, thickness_mm: f64) -> SpectralGrid {
    let pulse = PumpPulse {
        duration_fwhm_fs: duration_fs,
        ..PumpPulse::default()
    };
    let cut = CrystalCut::new(CALIBRATED_CUT_ANGLE_DEG, thickness_mm).unwrap();
    let spec = GridSpec {
        range_nm: (768.0, 792.0),
        points: 97,
        angle_samples: 31,
    };
    build_joint_spectrum(
        &pulse,
        &cut,
        &AcceptanceWindow::default(),
        &CollectionGeometry::default(),
        &SellmeierSet::default(),
        &spec,
    )
    .unwrap()
}

fn gaussian_trace(b: f64, v: f64, t0: f64, s: f64) -> DipTrace {
    let x = linspace(-600.0, 600.0, 121);
    let y = x.iter().map(|&t| b * (1.0 - v * (-(t - t0).powi(2) / (2.0 * s * s)).exp())).collect();
    DipTrace::new(x, DelayUnit::Femtoseconds, y, 10.0, DipKind::HomTwofold).unwrap()
}

pub fn extraordinary_index_is_sandwiched(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (sets(), 200.0f64..1100.0, 0.0f64..std::f64::consts::FRAC_PI_2), |(set, l, theta)| {
        let no = set.index_ordinary(l).unwrap();
        let ne = set.index_principal_extraordinary(l).unwrap();
        let n = set.index_extraordinary(l, theta).unwrap();
        prop_assert!(ne <= n + 1e-15 && n <= no + 1e-15);
        Ok(())
    })
}

pub fn indices_fall_with_wavelength(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (sets(), 200.0f64..1099.0, 0.1f64..1.0), |(set, l, dl)| {
        prop_assert!(set.index_ordinary(l + dl).unwrap() < set.index_ordinary(l).unwrap());
        prop_assert!(set.index_principal_extraordinary(l + dl).unwrap() < set.index_principal_extraordinary(l).unwrap());
        Ok(())
    })
}

pub fn extraordinary_index_falls_with_angle(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (sets(), 300.0f64..1000.0, 0.0f64..1.5, 0.001f64..0.07), |(set, l, a, da)| {
        prop_assert!(set.index_extraordinary(l, a + da).unwrap() < set.index_extraordinary(l, a).unwrap());
        Ok(())
    })
}

pub fn emission_conserves_energy(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (388.0f64..392.0, 700.0f64..870.0), |(pump, trigger)| {
        let e = solve_emission_angles(pump, trigger, &cut(), &SellmeierSet::default()).unwrap();
        let mismatch = 1.0 / e.pump_nm - 1.0 / e.trigger_nm - 1.0 / e.heralded_nm;
        prop_assert!((mismatch * e.pump_nm).abs() < 1e-12);
        let (t, l) = e.residuals(&cut(), &SellmeierSet::default()).unwrap();
        prop_assert!(t.abs() < 1e-9 && l.abs() < 1e-9);
        Ok(())
    })
}

pub fn budget_product_ignores_order(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (proptest::collection::vec(0.01f64..1.0, 1..8), any::<u64>()), |(mut t, seed)| {
        let forward = LossBudget::new(t.iter().enumerate().map(|(i, &v)| (format!("e{i}"), v))).unwrap().product();
        let mut rng = seed;
        for i in (1..t.len()).rev() {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            t.swap(i, (rng >> 33) as usize % (i + 1));
        }
        let shuffled = LossBudget::new(t.iter().enumerate().map(|(i, &v)| (format!("e{i}"), v))).unwrap().product();
        prop_assert!((forward - shuffled).abs() <= 1e-15 * forward.abs().max(1e-300) * 8.0);
        Ok(())
    })
}

pub fn filters_integrate_to_peak_times_width(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (700.0f64..860.0, 0.5f64..20.0, 0.05f64..1.0, any::<bool>()), |(c, w, peak, gaussian)| {
        let shape = if gaussian { FilterShape::Gaussian } else { FilterShape::TopHat };
        let f = FilterSpec::new(c, w, peak, shape).unwrap();
        // Cell averages tile the line exactly, so their sum is the integral.
        let step = w / 50.0;
        let axis = linspace(c - 8.0 * w, c + 8.0 * w, 801);
        let sum: f64 = axis.iter().map(|&l| f.cell_transmission(l, step)).sum::<f64>() * step;
        let exact = if gaussian { peak * w / (2.0 * (2.0 * 2f64.ln()).sqrt()) * (2.0 * std::f64::consts::PI).sqrt() } else { peak * w };
        prop_assert!((sum - exact).abs() < 1e-6 * exact);
        prop_assert!((f.integrated_transmission() - exact).abs() < 1e-12 * exact);
        for &l in &axis {
            let t = f.transmission(l);
            prop_assert!((0.0..=peak).contains(&t));
        }
        Ok(())
    })
}

pub fn tilt_tunes_blueward(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (700.0f64..860.0, 1.2f64..3.0, 0.0f64..44.0, 0.01f64..1.0), |(c, n, a, da)| {
        let f = FilterSpec::top_hat(c, 2.0, 0.6).unwrap().with_effective_index(n).unwrap();
        let lo = f.clone().with_tilt(a).unwrap().tilt_tuned_center();
        let hi = f.with_tilt(a + da).unwrap().tilt_tuned_center();
        prop_assert!(hi < lo && lo <= c);
        Ok(())
    })
}

pub fn fit_ignores_count_scale(deterministic: bool) -> Result<(), String> {
    check(256, deterministic, (0.2f64..1.0, -100.0f64..100.0, 30.0f64..150.0, 0.01f64..100.0, 0u64..1000), |(v, t0, s, scale, seed)| {
        let noisy = gaussian_trace(1000.0, v, t0, s).with_poisson_noise(seed).unwrap();
        let scaled = DipTrace { counts: noisy.counts.iter().map(|c| c * scale).collect(), ..noisy.clone() };
        let a = fit_gaussian_dip(&noisy).unwrap();
        let b = fit_gaussian_dip(&scaled).unwrap();
        prop_assert!((a.visibility - b.visibility).abs() < 1e-9);
        prop_assert!((a.center - b.center).abs() < 1e-9 * s);
        prop_assert!((a.width - b.width).abs() < 1e-9 * s);
        prop_assert!((b.baseline / a.baseline / scale - 1.0).abs() < 1e-9);
        Ok(())
    })
}

pub fn monte_carlo_is_seed_deterministic(deterministic: bool) -> Result<(), String> {
    check(16, deterministic, (any::<u64>(), 0.0f64..5000.0), |(seed, dark)| {
        let m = SourceModel { dark_rate_per_detector_hz: dark, ..SourceModel::default() };
        let a = simulate_counts(&m, 0.05, seed).unwrap();
        let b = simulate_counts(&m, 0.05, seed).unwrap();
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn accidentals_scale_with_window(deterministic: bool) -> Result<(), String> {
    check(16, deterministic, (0u64..1000,), |(seed,)| {
        // Uncorrelated dark counts dominate: the delayed-window accidental
        // count should grow in proportion to the coincidence window.
        let base = SourceModel {
            pair_probability_per_pulse: 0.0,
            dark_rate_per_detector_hz: 2.0e5,
            coincidence_window_ns: 2.0,
            ..SourceModel::default()
        };
        let wide = SourceModel { coincidence_window_ns: 8.0, ..base.clone() };
        let a = simulate_counts(&base, 0.5, seed).unwrap().accidental_estimate as f64;
        let b = simulate_counts(&wide, 0.5, seed).unwrap().accidental_estimate as f64;
        // Expected 2e5² · 2 ns · 0.5 s = 40 and 160 counts.
        let ratio = b / a;
        prop_assert!(a > 10.0);
        prop_assert!((ratio - 4.0).abs() < 4.0 * 5.0 * (1.0 / a + 1.0 / b).sqrt(), "ratio {}", ratio);
        Ok(())
    })
}

pub fn joint_spectrum_normalized_and_exchange_symmetric(deterministic: bool) -> Result<(), String> {
    check(6, deterministic, (60.0f64..400.0, 0.3f64..1.5), |(duration, thickness)| {
        let g = grid_for(duration, thickness);
        prop_assert!((g.integrated_norm() - 1.0).abs() < 1e-9);
        let peak = g.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
        prop_assert!(peak > 0.0);
        prop_assert_eq!(g.exchange_asymmetry().unwrap(), 0.0);
        Ok(())
    })
}

pub fn density_operator_is_a_state(deterministic: bool) -> Result<(), String> {
    check(6, deterministic, (60.0f64..400.0, 0.5f64..12.0), |(duration, f1_width)| {
        let g = grid_for(duration, 0.7);
        let f1 = FilterSpec::top_hat(780.0, f1_width, 1.0).unwrap();
        let rho = heralded_density_op(&g, &f1).unwrap();
        let scale = rho.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(rho.hermiticity_error() <= 1e-12 * scale);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
        let ev = rho.eigenvalues();
        prop_assert!(ev.iter().all(|&e| e > -1e-10));
        prop_assert!((ev.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        prop_assert!(rho.purity > 0.0 && rho.purity <= 1.0 + 1e-9);
        Ok(())
    })
}
