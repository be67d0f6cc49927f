//! Configuration file, subcommands and CSV/JSON artifact writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::counting::{
    conditional_efficiency, heralding_efficiency, predicted_conditional_efficiency, simulate_counts, LossBudget,
    SourceModel,
};
use crate::dispersion::SellmeierSet;
use crate::error::{Error, Result};
use crate::interference::{
    calibrate_mode_overlap, fit_gaussian_dip, hom_dip, hom_visibility, rt_dip, DipTrace, MICROMETERS_PER_FS,
};
use crate::numeric::linspace;
use crate::optics::{acceptance_angle, CollectionGeometry, FilterSpec};
use crate::phasematch::{
    accepted_photon_set, raw_trigger_bandwidth, solve_degenerate_cut_angle, tuning_curve, AcceptanceGrid,
    AcceptanceWindow, CrystalCut,
};
use crate::spectrum::{
    build_joint_spectrum, heralded_density_op, heralded_marginal, heralded_marginal_unfiltered, spectrometer_scan,
    GridSpec, PumpPulse, SpectralGrid, SpectralMode,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SCHEMA_VERSION: u32 = 1;

/// The configuration shipped with the crate, encoding the reference experiment.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub sellmeier: String,
    pub thickness_mm: f64,
    /// Degenerate external cone angle used to solve for the cut angle.
    pub target_cone_angle_deg: f64,
    /// Explicit cut angle; solved from the target cone angle when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_angle_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    pub pumps_nm: Vec<f64>,
    pub range_nm: (f64, f64),
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceSetConfig {
    pub pump_range_nm: (f64, f64),
    pub trigger_filters: Vec<String>,
    pub pump_samples: usize,
    pub trigger_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub trigger_filters: Vec<String>,
    pub spectrometer_filter: String,
    pub tilt_range_deg: (f64, f64),
    pub tilt_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub coincidence_rate_hz: f64,
    pub trigger_rate_hz: f64,
    /// Trigger filter conditioning the heralded spectrum.
    pub marginal_filter: String,
    /// Candidate analysis filters F2.
    pub analysis_filters: Vec<String>,
    /// Budget entry describing F2, replaced by the spectral model.
    pub filter_budget_label: String,
    pub coupling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayScan {
    pub min_fs: f64,
    pub max_fs: f64,
    pub samples: usize,
}

impl DelayScan {
    pub fn delays(&self) -> Vec<f64> {
        linspace(self.min_fs, self.max_fs, self.samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    pub f2: String,
    pub f3: String,
    pub delays: DelayScan,
    /// Rate of pairs reaching the splitter.
    pub pair_rate_hz: f64,
    pub bin_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtConfig {
    pub trigger_filter: String,
    pub heralded_filter: String,
    pub coherent_filter: String,
    pub coherent_center_nm: f64,
    pub coherent_duration_fs: f64,
    pub mean_photon_number: f64,
    pub target_visibility: f64,
    /// Residual distinguishability factor; calibrated to the target when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_overlap_factor: Option<f64>,
    pub baseline_counts: f64,
    pub bin_duration_s: f64,
    pub delays: DelayScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub crystal: CrystalConfig,
    pub window: AcceptanceWindow,
    pub pump: PumpPulse,
    pub geometry: CollectionGeometry,
    pub filters: BTreeMap<String, FilterSpec>,
    pub budget: LossBudget,
    pub source: SourceModel,
    pub grid: GridSpec,
    pub tuning: TuningConfig,
    pub acceptance_set: AcceptanceSetConfig,
    pub spectrum: SpectrumConfig,
    pub efficiency: EfficiencyConfig,
    pub hom: HomConfig,
    pub rt: RtConfig,
    pub simulate: SimulateConfig,
    /// Additional coefficient sets, selectable by id.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sellmeier_sets: Vec<SellmeierSet>,
}

fn at(key: impl Into<String>) -> impl FnOnce(Error) -> Error {
    let key = key.into();
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::Config {
            key,
            message: other.to_string(),
        },
    }
}

fn config_error(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parse and validate a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_error(key, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn reference() -> Self {
        Self::from_toml(REFERENCE_TOML).expect("shipped configuration is valid")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.sellmeier_sets.iter().enumerate() {
            s.validate().map_err(at(format!("sellmeier_sets[{i}]")))?;
        }
        self.sellmeier_set()?;
        if let Some(c) = self.crystal.cut_angle_deg {
            CrystalCut::new(c, self.crystal.thickness_mm).map_err(at("crystal.cut_angle_deg"))?;
        }
        if !(self.crystal.thickness_mm > 0.0 && self.crystal.thickness_mm.is_finite()) {
            return Err(config_error("crystal.thickness_mm", "must be finite and positive"));
        }
        self.window.validate().map_err(at("window"))?;
        self.pump.validate().map_err(at("pump"))?;
        self.geometry.validate().map_err(at("geometry"))?;
        for (name, f) in &self.filters {
            f.validate().map_err(at(format!("filters.{name}")))?;
        }
        self.budget.validate().map_err(at("budget"))?;
        self.source.validate().map_err(at("source"))?;
        self.grid.validate().map_err(at("grid"))?;
        if self.tuning.samples < 2 {
            return Err(config_error("tuning.samples", "needs at least 2 samples"));
        }
        if self.tuning.pumps_nm.is_empty() {
            return Err(config_error("tuning.pumps_nm", "no pump wavelength given"));
        }
        for (i, n) in self.acceptance_set.trigger_filters.iter().enumerate() {
            self.filter(&format!("acceptance_set.trigger_filters[{i}]"), n)?;
        }
        for (i, n) in self.spectrum.trigger_filters.iter().enumerate() {
            self.filter(&format!("spectrum.trigger_filters[{i}]"), n)?;
        }
        self.filter("spectrum.spectrometer_filter", &self.spectrum.spectrometer_filter)?;
        self.filter("efficiency.marginal_filter", &self.efficiency.marginal_filter)?;
        for (i, n) in self.efficiency.analysis_filters.iter().enumerate() {
            self.filter(&format!("efficiency.analysis_filters[{i}]"), n)?;
        }
        if !self.budget.entries.iter().any(|e| e.label == self.efficiency.filter_budget_label) {
            return Err(config_error(
                "efficiency.filter_budget_label",
                format!("no budget entry labelled `{}`", self.efficiency.filter_budget_label),
            ));
        }
        self.filter("hom.f2", &self.hom.f2)?;
        self.filter("hom.f3", &self.hom.f3)?;
        self.filter("rt.trigger_filter", &self.rt.trigger_filter)?;
        self.filter("rt.heralded_filter", &self.rt.heralded_filter)?;
        self.filter("rt.coherent_filter", &self.rt.coherent_filter)?;
        for (key, scan) in [("hom.delays", &self.hom.delays), ("rt.delays", &self.rt.delays)] {
            if scan.samples < 7 || !(scan.max_fs > scan.min_fs) {
                return Err(config_error(key, "needs an increasing range with at least 7 samples"));
            }
        }
        if !(self.simulate.duration_s > 0.0 && self.simulate.duration_s.is_finite()) {
            return Err(config_error("simulate.duration_s", "must be finite and positive"));
        }
        Ok(())
    }

    /// Named filter, with `key` naming the referencing field on error.
    pub fn filter(&self, key: &str, name: &str) -> Result<&FilterSpec> {
        self.filters
            .get(name)
            .ok_or_else(|| config_error(key, format!("unknown filter `{name}`")))
    }

    pub fn sellmeier_set(&self) -> Result<SellmeierSet> {
        let id = &self.crystal.sellmeier;
        self.sellmeier_sets
            .iter()
            .find(|s| &s.id == id)
            .cloned()
            .or_else(|| SellmeierSet::builtin(id))
            .ok_or_else(|| config_error("crystal.sellmeier", format!("unknown Sellmeier set `{id}`")))
    }

    /// Crystal cut, solving for the angle when it is not configured.
    pub fn crystal_cut(&self) -> Result<CrystalCut> {
        let angle = match self.crystal.cut_angle_deg {
            Some(a) => a,
            None => solve_degenerate_cut_angle(self.pump.center_nm, self.crystal.target_cone_angle_deg, &self.sellmeier_set()?)
                .map_err(at("crystal.target_cone_angle_deg"))?,
        };
        CrystalCut::new(angle, self.crystal.thickness_mm).map_err(at("crystal"))
    }

    pub fn joint_spectrum(&self) -> Result<SpectralGrid> {
        build_joint_spectrum(
            &self.pump,
            &self.crystal_cut()?,
            &self.window,
            &self.geometry,
            &self.sellmeier_set()?,
            &self.grid,
        )
    }

    /// The same experiment with refined (or coarsened) numerical grids.
    pub fn with_grid_scale(&self, factor: f64) -> Result<Self> {
        let mut c = self.clone();
        c.grid = self.grid.scaled(factor).map_err(at("--grid-scale"))?;
        let scale = |n: usize| (((n - 1) as f64 * factor).round() as usize).max(1) + 1;
        c.acceptance_set.pump_samples = scale(c.acceptance_set.pump_samples);
        c.acceptance_set.trigger_samples = scale(c.acceptance_set.trigger_samples);
        Ok(c)
    }
}

#[derive(Debug, Parser)]
#[command(name = "herald", version, about = "Heralded single-photon source simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML); the shipped default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override the configured random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Multiply grid resolutions by this factor.
    #[arg(long, global = true)]
    pub grid_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Emission angle versus wavelength for each configured pump wavelength.
    TuningCurve,
    /// Fiber acceptance angle and accepted photon sets.
    Acceptance,
    /// Joint spectrum, heralded marginals and spectrometer traces.
    Spectrum,
    /// Conditional detection and heralding efficiencies.
    Budget,
    /// Hong-Ou-Mandel dip and fit.
    Hom,
    /// Rarity-Tapster dip and fit.
    Rt,
    /// Monte Carlo counting run.
    Simulate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TuningCurve => "tuning-curve",
            Command::Acceptance => "acceptance",
            Command::Spectrum => "spectrum",
            Command::Budget => "budget",
            Command::Hom => "hom",
            Command::Rt => "rt",
            Command::Simulate => "simulate",
        }
    }
}

/// Machine-readable error document.
pub fn error_json(e: &Error) -> Value {
    let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
    if let Error::Config { key, .. } = e {
        body["key"] = json!(key);
    }
    json!({ "error": body, "tool_version": TOOL_VERSION })
}

fn schema(name: &str) -> String {
    format!("herald.{name}/{SCHEMA_VERSION}")
}

struct Writer<'a> {
    dir: &'a Path,
    config: &'a ExperimentConfig,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn csv(&mut self, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# schema: {}", schema(file.trim_end_matches(".csv")));
        let _ = writeln!(s, "{}", header.join(","));
        for r in rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        self.write(file, &s)
    }

    fn json(&mut self, file: &str, results: Value) -> Result<()> {
        let doc = json!({
            "schema": schema(file.trim_end_matches(".json")),
            "tool_version": TOOL_VERSION,
            "config": self.config,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))? + "\n";
        self.write(file, &text)
    }

    fn write(&mut self, file: &str, text: &str) -> Result<()> {
        let path = self.dir.join(file);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Run one subcommand and return the files written.
pub fn run(
    command: Command,
    config: &ExperimentConfig,
    out: &Path,
    seed: Option<u64>,
    grid_scale: Option<f64>,
) -> Result<Vec<PathBuf>> {
    let mut cfg = match grid_scale {
        Some(f) => config.with_grid_scale(f)?,
        None => config.clone(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    let mut w = Writer {
        dir: out,
        config: &cfg,
        written: Vec::new(),
    };
    match command {
        Command::TuningCurve => run_tuning(&cfg, &mut w)?,
        Command::Acceptance => run_acceptance(&cfg, &mut w)?,
        Command::Spectrum => run_spectrum(&cfg, &mut w)?,
        Command::Budget => run_budget(&cfg, &mut w)?,
        Command::Hom => run_hom(&cfg, &mut w)?,
        Command::Rt => run_rt(&cfg, &mut w)?,
        Command::Simulate => run_simulate(&cfg, &mut w)?,
    }
    Ok(w.written)
}

fn run_tuning(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let set = cfg.sellmeier_set()?;
    let cut = cfg.crystal_cut()?;
    let mut rows = Vec::new();
    let mut omitted = BTreeMap::new();
    for &p in &cfg.tuning.pumps_nm {
        let curve = tuning_curve(p, &cut, cfg.tuning.range_nm, cfg.tuning.samples, &set).map_err(at("tuning"))?;
        omitted.insert(num(p), curve.omitted);
        for pt in &curve.points {
            rows.push(vec![num(p), num(pt.signal_nm), num(pt.external_deg), num(pt.internal_deg)]);
        }
    }
    let raw = raw_trigger_bandwidth(cfg.pump.center_nm, &cut, &cfg.window, cfg.tuning.range_nm, cfg.tuning.samples, &set)?;
    w.csv("tuning_curve.csv", &["pump_nm", "signal_nm", "external_deg", "internal_deg"], rows)?;
    w.json(
        "tuning_curve.json",
        json!({
            "set_id": set.id,
            "interaction": cut.interaction(),
            "cut_angle_deg": cut.cut_angle_deg,
            "cut_angle_solved": cfg.crystal.cut_angle_deg.is_none(),
            "omitted_samples": omitted,
            "raw_trigger_bandwidth": {
                "lower_nm": raw.lower_nm,
                "upper_nm": raw.upper_nm,
                "extent_nm": raw.extent_nm(),
                "covered_nm": raw.covered_nm,
            },
        }),
    )
}

fn run_acceptance(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let set = cfg.sellmeier_set()?;
    let cut = cfg.crystal_cut()?;
    let width = acceptance_angle(&cfg.geometry)?;
    let mode = cfg.geometry.back_propagated_mode(cfg.geometry.wavelength_nm)?;
    let grid = AcceptanceGrid {
        pump_samples: cfg.acceptance_set.pump_samples,
        trigger_samples: cfg.acceptance_set.trigger_samples,
    };
    let mut sets = BTreeMap::new();
    for (i, name) in cfg.acceptance_set.trigger_filters.iter().enumerate() {
        let f = cfg.filter(&format!("acceptance_set.trigger_filters[{i}]"), name)?;
        let broadband = accepted_photon_set(cfg.acceptance_set.pump_range_nm, f, &cfg.window, &cut, &set, grid)?;
        let c = cfg.pump.center_nm;
        let mono = accepted_photon_set((c, c), f, &cfg.window, &cut, &set, grid)?;
        sets.insert(
            name.clone(),
            json!({
                "pump_range": broadband,
                "heralded_width_nm": broadband.heralded_width_nm(),
                "monochromatic": mono,
                "monochromatic_width_nm": mono.heralded_width_nm(),
            }),
        );
    }
    w.json(
        "acceptance.json",
        json!({
            "acceptance_angle_deg": width,
            "criterion": "full width where overlap >= 1/e^2 of peak",
            "mode_at_crystal": mode,
            "accepted_photon_sets": sets,
        }),
    )
}

fn run_spectrum(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let grid = cfg.joint_spectrum()?;
    let n = grid.heralded_axis.len();
    let mut rows = Vec::with_capacity(n * n);
    for (i, &lt) in grid.trigger_axis.iter().enumerate() {
        for (j, &lh) in grid.heralded_axis.iter().enumerate() {
            let a = grid.at(i, j);
            rows.push(vec![num(lt), num(lh), num(a.re), num(a.im)]);
        }
    }
    w.csv("joint_spectrum.csv", &["trigger_nm", "heralded_nm", "amplitude_re", "amplitude_im"], rows)?;

    let unfiltered = heralded_marginal_unfiltered(&grid)?;
    let spectrometer = cfg.filter("spectrum.spectrometer_filter", &cfg.spectrum.spectrometer_filter)?;
    let mut columns = vec![unfiltered.density.clone()];
    let mut scan_rows = Vec::new();
    let mut summary = BTreeMap::new();
    for (i, name) in cfg.spectrum.trigger_filters.iter().enumerate() {
        let f = cfg.filter(&format!("spectrum.trigger_filters[{i}]"), name)?;
        let m = heralded_marginal(&grid, f)?;
        let rho = heralded_density_op(&grid, f)?;
        let trace = spectrometer_scan(&m, spectrometer, cfg.spectrum.tilt_range_deg, cfg.spectrum.tilt_steps)?;
        for p in &trace.points {
            scan_rows.push(vec![name.clone(), num(p.tilt_deg), num(p.center_nm), num(p.rate)]);
        }
        summary.insert(
            name.clone(),
            json!({
                "marginal_fwhm_nm": m.fwhm_nm(),
                "marginal_mean_nm": m.mean_nm(),
                "trace_mirrored_fwhm_nm": trace.mirrored_fwhm_nm(),
                "purity": rho.purity,
                "largest_eigenvalue": rho.largest_eigenvalue(),
            }),
        );
        columns.push(m.density);
    }
    let mut header = vec!["heralded_nm".to_string(), "unfiltered".to_string()];
    header.extend(cfg.spectrum.trigger_filters.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let marginal_rows = (0..n).map(|j| {
        let mut r = vec![num(grid.heralded_axis[j])];
        r.extend(columns.iter().map(|c| num(c[j])));
        r
    });
    w.csv("marginals.csv", &header_refs, marginal_rows)?;
    w.csv("spectrometer.csv", &["trigger_filter", "tilt_deg", "center_nm", "rate"], scan_rows)?;
    w.json(
        "spectrum.json",
        json!({
            "pump_spectral_fwhm_nm": cfg.pump.spectral_fwhm_nm(),
            "grid": cfg.grid,
            "raw_norm": grid.norm,
            "unfiltered_marginal_fwhm_nm": unfiltered.fwhm_nm(),
            "trigger_filters": summary,
        }),
    )
}

/// Efficiency figures derived from the configured rates and spectra.
pub fn budget_report(cfg: &ExperimentConfig) -> Result<Value> {
    let e = &cfg.efficiency;
    let eta_d = conditional_efficiency(e.coincidence_rate_hz, e.trigger_rate_hz).map_err(at("efficiency"))?;
    let h = heralding_efficiency(eta_d, &cfg.budget).map_err(at("budget"))?;
    // Headline figure: η_D rounded to two digits first.
    let eta_rounded = (eta_d * 100.0).round() / 100.0;
    let h_rounded = heralding_efficiency(eta_rounded, &cfg.budget).map_err(at("budget"))?;
    let grid = cfg.joint_spectrum()?;
    let marginal = heralded_marginal(&grid, cfg.filter("efficiency.marginal_filter", &e.marginal_filter)?)?;
    let nonfilter = cfg.budget.without(&e.filter_budget_label);
    let mut predicted = BTreeMap::new();
    for (i, name) in e.analysis_filters.iter().enumerate() {
        let f = cfg.filter(&format!("efficiency.analysis_filters[{i}]"), name)?;
        predicted.insert(name.clone(), predicted_conditional_efficiency(&marginal, f, &nonfilter, e.coupling)?);
    }
    Ok(json!({
        "conditional_efficiency": eta_d,
        "conditional_efficiency_percent": (eta_d * 1000.0).round() / 10.0,
        "budget_product": cfg.budget.product(),
        "heralding_efficiency": h,
        "heralding_efficiency_percent": (h * 1000.0).round() / 10.0,
        "rounded_conditional_efficiency": eta_rounded,
        "heralding_efficiency_from_rounded": h_rounded,
        "predicted": predicted,
        "marginal_filter": e.marginal_filter,
    }))
}

fn run_budget(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let report = budget_report(cfg)?;
    w.json("budget.json", report)
}

fn dip_rows(expected: &DipTrace, sampled: &DipTrace) -> Vec<Vec<String>> {
    expected
        .delays
        .iter()
        .zip(&expected.counts)
        .zip(&sampled.counts)
        .map(|((&d, &e), &s)| vec![num(d), num(d * MICROMETERS_PER_FS), num(e), num(s)])
        .collect()
}

fn run_hom(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let grid = cfg.joint_spectrum()?;
    let f2 = cfg.filter("hom.f2", &cfg.hom.f2)?;
    let f3 = cfg.filter("hom.f3", &cfg.hom.f3)?;
    let expected = hom_dip(&grid, f2, f3, &cfg.hom.delays.delays(), cfg.hom.pair_rate_hz, cfg.hom.bin_duration_s)?;
    let sampled = expected.with_poisson_noise(cfg.seed)?;
    w.csv("hom.csv", &["delay_fs", "delay_um", "expected_counts", "sampled_counts"], dip_rows(&expected, &sampled))?;
    w.json(
        "hom.json",
        json!({
            "visibility": hom_visibility(&grid, f2, f3)?,
            "wing_counts": expected.wing_level(),
            "center_counts": expected.counts.iter().cloned().fold(f64::INFINITY, f64::min),
            "fit_expected": fit_gaussian_dip(&expected)?,
            "fit_sampled": fit_gaussian_dip(&sampled)?,
            "seed": cfg.seed,
        }),
    )
}

fn run_rt(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let r = &cfg.rt;
    let grid = cfg.joint_spectrum()?;
    let rho = heralded_density_op(&grid, cfg.filter("rt.trigger_filter", &r.trigger_filter)?)?
        .filtered(cfg.filter("rt.heralded_filter", &r.heralded_filter)?)?;
    let pulse = PumpPulse {
        center_nm: r.coherent_center_nm,
        duration_fwhm_fs: r.coherent_duration_fs,
        ..cfg.pump.clone()
    };
    let phi = SpectralMode::coherent_pulse(&pulse, Some(cfg.filter("rt.coherent_filter", &r.coherent_filter)?), &rho.axis_nm)?;
    let overlap = rho.expectation(&phi)?;
    let (m, calibrated) = match r.mode_overlap_factor {
        Some(m) => (m, false),
        None => (calibrate_mode_overlap(&rho, &phi, r.target_visibility).map_err(at("rt.target_visibility"))?, true),
    };
    let expected = rt_dip(&rho, &phi, r.mean_photon_number, m, &r.delays.delays(), r.baseline_counts, r.bin_duration_s)
        .map_err(at("rt"))?;
    let sampled = expected.with_poisson_noise(cfg.seed)?;
    w.csv("rt.csv", &["delay_fs", "delay_um", "expected_counts", "sampled_counts"], dip_rows(&expected, &sampled))?;
    w.json(
        "rt.json",
        json!({
            "spectral_overlap": overlap,
            "mode_overlap_factor": m,
            "mode_overlap_calibrated": calibrated,
            "visibility_zero_delay": m * overlap,
            "largest_eigenvalue": rho.largest_eigenvalue(),
            "purity": rho.purity,
            "fit_expected": fit_gaussian_dip(&expected)?,
            "fit_sampled": fit_gaussian_dip(&sampled)?,
            "seed": cfg.seed,
        }),
    )
}

fn run_simulate(cfg: &ExperimentConfig, w: &mut Writer) -> Result<()> {
    let rec = simulate_counts(&cfg.source, cfg.simulate.duration_s, cfg.seed)?;
    w.json(
        "counts.json",
        json!({
            "record": rec,
            "trigger_rate_hz": rec.trigger_rate(),
            "coincidence_rate_hz": rec.coincidence_rate(),
            "conditional_efficiency": rec.conditional_efficiency().ok(),
            "expected_trigger_rate_hz": cfg.source.expected_trigger_rate(),
        }),
    )
}
