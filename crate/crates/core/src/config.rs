//! TOML run configuration: material and device sections, photorefraction
//! parameters keyed by temperature, and one section per pipeline.
//!
//! Every field has a default, so a file only needs what it changes. Device
//! sections are optional and checked when a pipeline asks for them.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity::{FpiCavity, SqueezerCavity};
use crate::coupler::CouplerGeometry;
use crate::error::{Error, Result};
use crate::material::{
    Band, MaterialModel, ModeId, PhotorefractionParams, PhotorefractionTable, PumpSchedule,
    PumpSegment, Sellmeier, NIR_MODE, TELECOM_MODE,
};
use crate::spdc::{QpmDevice, QpmWaveguide};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub run: RunSection,
    pub material: MaterialSection,
    pub photorefraction: Vec<PhotorefractionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpi: Option<FpiSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub squeezer: Option<SqueezerSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupler: Option<CouplerSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qpm: Option<QpmSection>,
    pub fpi_trace: FpiTraceRun,
    pub fpi_char: FpiCharRun,
    pub coupler_sweep: CouplerSweepRun,
    pub homodyne: HomodyneRun,
    pub opo_spectrum: OpoSpectrumRun,
    pub spdc_spectrum: SpdcSpectrumRun,
    pub squeeze_budget: SqueezeBudgetRun,
    pub fit_dn: FitDnRun,
    pub fit_fpi: FitFpiRun,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            run: RunSection::default(),
            material: MaterialSection::default(),
            photorefraction: PhotorefractionTable::lithium_niobate_defaults()
                .iter()
                .map(PhotorefractionSection::from)
                .collect(),
            fpi: None,
            squeezer: None,
            coupler: None,
            qpm: None,
            fpi_trace: FpiTraceRun::default(),
            fpi_char: FpiCharRun::default(),
            coupler_sweep: CouplerSweepRun::default(),
            homodyne: HomodyneRun::default(),
            opo_spectrum: OpoSpectrumRun::default(),
            spdc_spectrum: SpdcSpectrumRun::default(),
            squeeze_budget: SqueezeBudgetRun::default(),
            fit_dn: FitDnRun::default(),
            fit_fpi: FitFpiRun::default(),
            base_dir: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    /// Seed for synthetic noise.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialSection {
    pub sellmeier: Sellmeier,
    /// Temperature at which mode offsets are calibrated, °C.
    pub temperature_reference_c: f64,
    pub modes: Vec<ModeSection>,
}

impl Default for MaterialSection {
    fn default() -> Self {
        MaterialSection {
            sellmeier: Sellmeier::default(),
            temperature_reference_c: 30.0,
            modes: vec![
                ModeSection {
                    id: TELECOM_MODE.into(),
                    band: Band::TELECOM,
                    offset: None,
                    calibration: Some(ModeCalibration {
                        wavelength_nm: 1550.0,
                        target_index: 2.13,
                    }),
                },
                ModeSection {
                    id: NIR_MODE.into(),
                    band: Band::NIR,
                    offset: None,
                    calibration: Some(ModeCalibration {
                        wavelength_nm: 775.0,
                        target_index: 2.18,
                    }),
                },
            ],
        }
    }
}

/// A guided mode given either by an explicit offset or by a calibration
/// target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSection {
    pub id: String,
    pub band: Band,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<ModeCalibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeCalibration {
    pub wavelength_nm: f64,
    pub target_index: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotorefractionSection {
    pub temperature_c: f64,
    pub a: f64,
    /// mW
    pub b: f64,
    pub c: f64,
    #[serde(default = "default_tau_build")]
    pub tau_build_s: f64,
    #[serde(default = "default_tau_dark")]
    pub tau_dark_s: f64,
    #[serde(default = "default_tau_erase")]
    pub tau_erase_s: f64,
}

fn default_tau_build() -> f64 {
    PhotorefractionParams::DEFAULT_TAU_BUILD_S
}
fn default_tau_dark() -> f64 {
    PhotorefractionParams::DEFAULT_TAU_DARK_S
}
fn default_tau_erase() -> f64 {
    PhotorefractionParams::DEFAULT_TAU_ERASE_S
}

impl From<&PhotorefractionParams> for PhotorefractionSection {
    fn from(p: &PhotorefractionParams) -> Self {
        PhotorefractionSection {
            temperature_c: p.temperature_c,
            a: p.a,
            b: p.b,
            c: p.c,
            tau_build_s: p.tau_build_s,
            tau_dark_s: p.tau_dark_s,
            tau_erase_s: p.tau_erase_s,
        }
    }
}

impl PhotorefractionSection {
    fn params(&self) -> PhotorefractionParams {
        PhotorefractionParams {
            temperature_c: self.temperature_c,
            a: self.a,
            b: self.b,
            c: self.c,
            tau_build_s: self.tau_build_s,
            tau_dark_s: self.tau_dark_s,
            tau_erase_s: self.tau_erase_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpiSection {
    pub length_mm: f64,
    pub facet_reflectivity_probe: f64,
    pub facet_reflectivity_pump: f64,
    #[serde(default)]
    pub angled_facets: bool,
    #[serde(default = "telecom_mode")]
    pub probe_mode: String,
    #[serde(default = "nir_mode")]
    pub pump_mode: String,
}

fn telecom_mode() -> String {
    TELECOM_MODE.into()
}
fn nir_mode() -> String {
    NIR_MODE.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezerSection {
    pub length_mm: f64,
    pub mirror_r1: f64,
    pub mirror_r2: f64,
    #[serde(default = "telecom_mode")]
    pub mode: String,
    #[serde(default = "telecom_wavelength")]
    pub wavelength_nm: f64,
}

fn telecom_wavelength() -> f64 {
    1550.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerSection {
    pub interaction_length_mm: f64,
    #[serde(default = "default_separation")]
    pub waveguide_separation_um: f64,
    #[serde(default = "telecom_wavelength")]
    pub design_wavelength_nm: f64,
    /// Coupling constant per temperature.
    pub coupling: Vec<CouplingEntry>,
}

fn default_separation() -> f64 {
    14.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEntry {
    pub temperature_c: f64,
    /// mm⁻¹
    pub coupling_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmSection {
    pub length_mm: f64,
    #[serde(default = "nir_mode")]
    pub pump_mode: String,
    #[serde(default = "telecom_mode")]
    pub signal_mode: String,
    #[serde(default = "telecom_mode")]
    pub idler_mode: String,
    /// Fraction of the pump-index shift also applied at 1550 nm.
    #[serde(default)]
    pub telecom_shift_scale: f64,
    /// Operating point at which the poling period is calibrated to
    /// degeneracy.
    pub calibration_temperature_c: f64,
    pub calibration_pump_wavelength_nm: f64,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Grid {
            start,
            stop,
            points,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }

    fn check(&self, path: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::config(path, "grid bounds must be finite"));
        }
        if self.points < 2 || self.stop <= self.start {
            return Err(Error::config(
                path,
                "grid needs at least 2 points and stop > start",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpiTraceRun {
    pub temperatures_c: Vec<f64>,
    pub probe_wavelength_nm: f64,
    pub sample_period_s: f64,
    pub schedule: Vec<PumpSegment>,
}

impl Default for FpiTraceRun {
    fn default() -> Self {
        FpiTraceRun {
            temperatures_c: vec![30.0, 60.0, 90.0],
            probe_wavelength_nm: 1550.0,
            sample_period_s: 0.05,
            schedule: vec![PumpSegment::dark(0.0, 10.0), PumpSegment::pump(10.0, 80.0, 7.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpiCharRun {
    pub wavelengths_nm: Vec<f64>,
    pub temperature_c: f64,
}

impl Default for FpiCharRun {
    fn default() -> Self {
        FpiCharRun {
            wavelengths_nm: vec![1550.0, 775.0],
            temperature_c: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplerSweepRun {
    pub temperatures_c: Vec<f64>,
    pub powers_mw: Grid,
}

impl Default for CouplerSweepRun {
    fn default() -> Self {
        CouplerSweepRun {
            temperatures_c: vec![30.0, 60.0, 90.0],
            powers_mw: Grid::new(0.0, 15.0, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomodyneRun {
    pub reflectivity: f64,
    pub lo_amplitude_sq: f64,
    pub squeezing_db: Vec<f64>,
    pub phase_rad: Grid,
}

impl Default for HomodyneRun {
    fn default() -> Self {
        HomodyneRun {
            reflectivity: 0.5,
            lo_amplitude_sq: 1.0,
            squeezing_db: vec![0.0, -3.0, -5.0, -10.0],
            phase_rad: Grid::new(0.0, PI, 181),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpoSpectrumRun {
    /// Squeezing at zero detuning and zero frequency that fixes σ.
    pub squeezing_db: Vec<f64>,
    pub detunings: Vec<f64>,
    /// Index shifts converted to detunings through the squeezer cavity.
    pub delta_n: Vec<f64>,
    pub detection_efficiency: f64,
    /// Analysis frequency in units of the cavity decay rate.
    pub omega: Grid,
    pub detuning_sweep: Grid,
}

impl Default for OpoSpectrumRun {
    fn default() -> Self {
        OpoSpectrumRun {
            squeezing_db: vec![-5.0, -10.0],
            detunings: vec![0.0, 0.5, 1.0, 1.5],
            delta_n: Vec::new(),
            detection_efficiency: 1.0,
            omega: Grid::new(0.0, 5.0, 201),
            detuning_sweep: Grid::new(0.0, 3.0, 61),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointEntry {
    pub temperature_c: f64,
    pub pump_wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpdcSpectrumRun {
    pub operating_points: Vec<OperatingPointEntry>,
    pub powers_mw: Vec<f64>,
    pub signal_nm: Grid,
    pub background: f64,
    /// Pump power whose index shift is included when calibrating the
    /// poling period; below it the emission is off degeneracy.
    pub reference_power_mw: f64,
}

impl Default for SpdcSpectrumRun {
    fn default() -> Self {
        SpdcSpectrumRun {
            operating_points: vec![
                OperatingPointEntry {
                    temperature_c: 30.0,
                    pump_wavelength_nm: 770.73,
                },
                OperatingPointEntry {
                    temperature_c: 90.0,
                    pump_wavelength_nm: 774.63,
                },
            ],
            powers_mw: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            signal_nm: Grid::new(1480.0, 1620.0, 1401),
            background: 0.0,
            reference_power_mw: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqueezeBudgetRun {
    pub temperature_c: f64,
    pub initial_db: Vec<f64>,
    pub residual_powers_mw: Grid,
    pub pump_during_calibration: bool,
    /// Nonlinear efficiency, mW^(-1/2).
    pub mu0: f64,
    pub pump_powers_mw: Grid,
    pub pump_wavelength_nm: f64,
    /// As in `spdc_spectrum`; 0 puts degeneracy at zero pump.
    pub reference_power_mw: f64,
}

impl Default for SqueezeBudgetRun {
    fn default() -> Self {
        SqueezeBudgetRun {
            temperature_c: 30.0,
            initial_db: vec![-3.0, -5.0, -10.0],
            residual_powers_mw: Grid::new(0.0, 15.0, 31),
            pump_during_calibration: false,
            mu0: 0.101,
            pump_powers_mw: Grid::new(0.0, 100.0, 101),
            pump_wavelength_nm: 770.73,
            reference_power_mw: 0.0,
        }
    }
}

/// A reflectivity sweep; without `path` one is synthesized from the
/// configured photorefraction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDnSweep {
    pub temperature_c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitDnRun {
    pub sweeps: Vec<FitDnSweep>,
    /// Held fixed; only a/b and c/b are identifiable.
    pub b_mw: f64,
    pub synthetic_noise: f64,
    pub synthetic_powers_mw: Grid,
}

impl Default for FitDnRun {
    fn default() -> Self {
        FitDnRun {
            sweeps: [30.0, 60.0, 90.0]
                .into_iter()
                .map(|t| FitDnSweep {
                    temperature_c: t,
                    path: None,
                })
                .collect(),
            b_mw: 1.0,
            synthetic_noise: 0.01,
            synthetic_powers_mw: Grid::new(0.0, 15.0, 16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitFpiRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub temperature_c: f64,
    pub probe_wavelength_nm: f64,
    pub pump_on_s: f64,
    /// Multiplicative noise of the synthetic trace used without `path`.
    pub synthetic_noise: f64,
}

impl Default for FitFpiRun {
    fn default() -> Self {
        FitFpiRun {
            path: None,
            temperature_c: 30.0,
            probe_wavelength_nm: 1550.0,
            pump_on_s: 10.0,
            synthetic_noise: 0.02,
        }
    }
}

/// A parsed configuration and the unknown keys that were tolerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: Config,
    pub warnings: Vec<String>,
}

/// Reads and validates a configuration file. Unknown keys are errors when
/// `strict`, warnings otherwise.
pub fn parse_config(path: &Path, strict: bool) -> Result<Parsed> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    let mut parsed = parse_str(&text, &path.display().to_string(), strict)?;
    parsed.config.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok(parsed)
}

pub fn parse_str(text: &str, source: &str, strict: bool) -> Result<Parsed> {
    let syntax = |e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let location = match line {
            Some(l) => format!("{source}:{l}"),
            None => source.to_owned(),
        };
        Error::config(location, e.message().to_owned())
    };
    let de = toml::Deserializer::parse(text).map_err(syntax)?;
    let mut unknown = Vec::new();
    let config: Config =
        serde_ignored::deserialize(de, |p| unknown.push(p.to_string().replace(".?", ""))).map_err(syntax)?;
    if strict {
        if let Some(key) = unknown.first() {
            return Err(Error::config(key.clone(), "unknown key"));
        }
    }
    config.validate()?;
    Ok(Parsed {
        config,
        warnings: unknown.into_iter().map(|k| format!("unknown key `{k}` ignored")).collect(),
    })
}

impl Config {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<serialize>", e.to_string()))
    }

    /// SHA-256 of the canonical serialization (defaults filled in).
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let material = self.material_model()?;
        let table = self.photorefraction_table()?;
        let has_t = |t: f64, path: &str| -> Result<()> {
            table
                .at(t)
                .map(|_| ())
                .map_err(|_| Error::config(path, format!("no photorefraction section for {t} °C")))
        };
        let material = Arc::new(material);
        if self.fpi.is_some() {
            self.fpi_cavity(material.clone())?;
        }
        if self.squeezer.is_some() {
            self.squeezer_cavity(material.clone())?;
        }
        if let Some(c) = &self.coupler {
            let mut seen = BTreeSet::new();
            for (i, e) in c.coupling.iter().enumerate() {
                let path = format!("coupler.coupling[{i}]");
                if !seen.insert(e.temperature_c.to_bits()) {
                    return Err(Error::config(path, "duplicate temperature"));
                }
                self.coupler_geometry(e.temperature_c)
                    .map_err(|e| Error::config(path, e.to_string()))?;
            }
        }
        if self.qpm.is_some() {
            self.qpm_waveguide(&material)?;
        }

        let r = &self.fpi_trace;
        for (i, &t) in r.temperatures_c.iter().enumerate() {
            has_t(t, &format!("fpi_trace.temperatures_c[{i}]"))?;
        }
        if !(r.sample_period_s > 0.0) {
            return Err(Error::config("fpi_trace.sample_period_s", "must be positive"));
        }
        self.schedule()?;

        for (i, &t) in self.coupler_sweep.temperatures_c.iter().enumerate() {
            has_t(t, &format!("coupler_sweep.temperatures_c[{i}]"))?;
        }
        check_powers_grid(&self.coupler_sweep.powers_mw, "coupler_sweep.powers_mw")?;

        let h = &self.homodyne;
        if !(0.0..=1.0).contains(&h.reflectivity) {
            return Err(Error::config("homodyne.reflectivity", "must lie in [0, 1]"));
        }
        if !(h.lo_amplitude_sq > 0.0) {
            return Err(Error::config("homodyne.lo_amplitude_sq", "must be positive"));
        }
        check_levels(&h.squeezing_db, "homodyne.squeezing_db")?;
        h.phase_rad.check("homodyne.phase_rad")?;

        let o = &self.opo_spectrum;
        check_levels(&o.squeezing_db, "opo_spectrum.squeezing_db")?;
        if !(o.detection_efficiency > 0.0 && o.detection_efficiency <= 1.0) {
            return Err(Error::config(
                "opo_spectrum.detection_efficiency",
                "must lie in (0, 1]",
            ));
        }
        if !o.delta_n.is_empty() && self.squeezer.is_none() {
            return Err(Error::config(
                "opo_spectrum.delta_n",
                "needs a [squeezer] section to convert index shifts",
            ));
        }
        o.omega.check("opo_spectrum.omega")?;
        o.detuning_sweep.check("opo_spectrum.detuning_sweep")?;
        if o.omega.start < 0.0 {
            return Err(Error::config("opo_spectrum.omega", "frequencies must be ≥ 0"));
        }

        let s = &self.spdc_spectrum;
        for (i, op) in s.operating_points.iter().enumerate() {
            has_t(op.temperature_c, &format!("spdc_spectrum.operating_points[{i}]"))?;
        }
        if s.powers_mw.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::config("spdc_spectrum.powers_mw", "must be non-negative"));
        }
        s.signal_nm.check("spdc_spectrum.signal_nm")?;
        if !(0.0..1.0).contains(&s.background) {
            return Err(Error::config("spdc_spectrum.background", "must lie in [0, 1)"));
        }
        if !(s.reference_power_mw >= 0.0) {
            return Err(Error::config("spdc_spectrum.reference_power_mw", "must be ≥ 0"));
        }

        let b = &self.squeeze_budget;
        has_t(b.temperature_c, "squeeze_budget.temperature_c")?;
        check_levels(&b.initial_db, "squeeze_budget.initial_db")?;
        check_powers_grid(&b.residual_powers_mw, "squeeze_budget.residual_powers_mw")?;
        check_powers_grid(&b.pump_powers_mw, "squeeze_budget.pump_powers_mw")?;
        if !(b.mu0 > 0.0) {
            return Err(Error::config("squeeze_budget.mu0", "must be positive"));
        }

        let f = &self.fit_dn;
        if !(f.b_mw > 0.0) {
            return Err(Error::config("fit_dn.b_mw", "must be positive"));
        }
        if !(f.synthetic_noise >= 0.0) {
            return Err(Error::config("fit_dn.synthetic_noise", "must be ≥ 0"));
        }
        check_powers_grid(&f.synthetic_powers_mw, "fit_dn.synthetic_powers_mw")?;
        for (i, sw) in f.sweeps.iter().enumerate() {
            if sw.path.is_none() {
                has_t(sw.temperature_c, &format!("fit_dn.sweeps[{i}]"))?;
            }
        }
        let p = &self.fit_fpi;
        if p.path.is_none() {
            has_t(p.temperature_c, "fit_fpi.temperature_c")?;
        }
        if !(p.synthetic_noise >= 0.0) {
            return Err(Error::config("fit_fpi.synthetic_noise", "must be ≥ 0"));
        }
        Ok(())
    }

    pub fn material_model(&self) -> Result<MaterialModel> {
        let m = &self.material;
        let mut model = MaterialModel::new(m.sellmeier, m.temperature_reference_c)
            .map_err(|e| Error::config("material.temperature_reference_c", e.to_string()))?;
        let mut seen = BTreeSet::new();
        for (i, mode) in m.modes.iter().enumerate() {
            let path = format!("material.modes[{i}]");
            if !seen.insert(mode.id.clone()) {
                return Err(Error::config(path, format!("duplicate mode `{}`", mode.id)));
            }
            let id = ModeId::new(mode.id.clone());
            let res = match (mode.offset, mode.calibration) {
                (Some(offset), None) => model.insert_mode(id, mode.band, offset),
                (None, Some(c)) => model
                    .calibrate_mode(id, mode.band, c.wavelength_nm, c.target_index)
                    .map(|_| ()),
                _ => {
                    return Err(Error::config(
                        path,
                        "give exactly one of `offset` or `calibration`",
                    ))
                }
            };
            res.map_err(|e| Error::config(path, e.to_string()))?;
        }
        Ok(model)
    }

    pub fn photorefraction_table(&self) -> Result<PhotorefractionTable> {
        let mut seen = BTreeSet::new();
        let mut sets = Vec::new();
        for (i, s) in self.photorefraction.iter().enumerate() {
            let path = format!("photorefraction[{i}] ({} °C)", s.temperature_c);
            let p = s.params();
            p.check().map_err(|m| Error::config(path.clone(), m))?;
            if !seen.insert(s.temperature_c.to_bits()) {
                return Err(Error::config(path, "duplicate temperature"));
            }
            sets.push(p);
        }
        if sets.is_empty() {
            return Err(Error::config("photorefraction", "at least one section required"));
        }
        PhotorefractionTable::new(sets).map_err(|e| Error::config("photorefraction", e.to_string()))
    }

    pub fn fpi_cavity(&self, material: Arc<MaterialModel>) -> Result<FpiCavity> {
        let s = self
            .fpi
            .as_ref()
            .ok_or_else(|| Error::config("fpi", "section required"))?;
        let cavity = FpiCavity {
            length_mm: s.length_mm,
            facet_reflectivity_probe: s.facet_reflectivity_probe,
            facet_reflectivity_pump: s.facet_reflectivity_pump,
            angled_facets: s.angled_facets,
            probe_mode: ModeId::new(s.probe_mode.clone()),
            pump_mode: ModeId::new(s.pump_mode.clone()),
            material,
        };
        cavity.validate().map_err(|e| Error::config("fpi", e.to_string()))?;
        Ok(cavity)
    }

    pub fn squeezer_cavity(&self, material: Arc<MaterialModel>) -> Result<SqueezerCavity> {
        let s = self
            .squeezer
            .as_ref()
            .ok_or_else(|| Error::config("squeezer", "section required"))?;
        let cavity = SqueezerCavity::new(
            s.length_mm,
            s.mirror_r1,
            s.mirror_r2,
            ModeId::new(s.mode.clone()),
            material,
        )
        .map_err(|e| Error::config("squeezer", e.to_string()))?;
        cavity
            .decay_rate(s.wavelength_nm)
            .map_err(|e| Error::config("squeezer.wavelength_nm", e.to_string()))?;
        Ok(cavity)
    }

    /// Coupler geometry with the coupling constant measured at `temperature_c`.
    pub fn coupler_geometry(&self, temperature_c: f64) -> Result<CouplerGeometry> {
        let s = self
            .coupler
            .as_ref()
            .ok_or_else(|| Error::config("coupler", "section required"))?;
        let k = s
            .coupling
            .iter()
            .find(|e| (e.temperature_c - temperature_c).abs() < 1e-9)
            .ok_or_else(|| {
                Error::config(
                    "coupler.coupling",
                    format!("no coupling constant for {temperature_c} °C"),
                )
            })?
            .coupling_constant;
        let mut g = CouplerGeometry::new(k, s.interaction_length_mm)
            .map_err(|e| Error::config("coupler", e.to_string()))?;
        g.waveguide_separation_um = s.waveguide_separation_um;
        g.design_wavelength_nm = s.design_wavelength_nm;
        Ok(g)
    }

    /// A 50/50 homodyne coupler (length 3L_c/2) with the coupling constant
    /// at `temperature_c`.
    pub fn balanced_coupler(&self, temperature_c: f64) -> Result<CouplerGeometry> {
        let base = self.coupler_geometry(temperature_c)?;
        let mut g = CouplerGeometry::balanced(base.coupling_constant)?;
        g.waveguide_separation_um = base.waveguide_separation_um;
        g.design_wavelength_nm = base.design_wavelength_nm;
        Ok(g)
    }

    fn qpm_waveguide(&self, material: &MaterialModel) -> Result<QpmWaveguide> {
        let s = self
            .qpm
            .as_ref()
            .ok_or_else(|| Error::config("qpm", "section required"))?;
        if !(s.length_mm > 0.0) {
            return Err(Error::config("qpm.length_mm", "must be positive"));
        }
        let w = QpmWaveguide {
            pump_mode: ModeId::new(s.pump_mode.clone()),
            signal_mode: ModeId::new(s.signal_mode.clone()),
            idler_mode: ModeId::new(s.idler_mode.clone()),
            telecom_shift_scale: s.telecom_shift_scale,
        };
        for m in [&w.pump_mode, &w.signal_mode, &w.idler_mode] {
            material
                .mode(m)
                .map_err(|e| Error::config("qpm", e.to_string()))?;
        }
        Ok(w)
    }

    /// Poled device calibrated to degeneracy at the configured operating
    /// point, including the pump-index shift at `reference_power_mw`.
    pub fn qpm_device(
        &self,
        material: Arc<MaterialModel>,
        reference_power_mw: f64,
    ) -> Result<QpmDevice> {
        let waveguide = self.qpm_waveguide(&material)?;
        let s = self.qpm.as_ref().expect("checked by qpm_waveguide");
        let table = self.photorefraction_table()?;
        let shift = table
            .at(s.calibration_temperature_c)
            .map_err(|e| Error::config("qpm.calibration_temperature_c", e.to_string()))?
            .delta_n_steady(reference_power_mw);
        QpmDevice::calibrated(
            s.length_mm,
            waveguide,
            material,
            s.calibration_temperature_c,
            s.calibration_pump_wavelength_nm,
            2.0 * s.calibration_pump_wavelength_nm,
            shift,
        )
        .map_err(|e| match e {
            Error::Numerical(_) => e,
            e => Error::config("qpm", e.to_string()),
        })
    }

    pub fn schedule(&self) -> Result<PumpSchedule> {
        PumpSchedule::new(self.fpi_trace.schedule.clone())
            .map_err(|e| Error::config("fpi_trace.schedule", e.to_string()))
    }
}

fn check_levels(levels: &[f64], path: &str) -> Result<()> {
    if levels.iter().any(|l| !(l.is_finite() && *l <= 0.0)) {
        return Err(Error::config(path, "squeezing levels must be ≤ 0 dB"));
    }
    Ok(())
}

fn check_powers_grid(grid: &Grid, path: &str) -> Result<()> {
    grid.check(path)?;
    if grid.start < 0.0 {
        return Err(Error::config(path, "powers must be non-negative"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[material]
temperature_reference_c = 30.0

[fpi]
length_mm = 15.0
facet_reflectivity_probe = 0.14
facet_reflectivity_pump = 0.13
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let parsed = parse_str(MINIMAL, "minimal.toml", true).unwrap();
        let c = parsed.config;
        assert!(parsed.warnings.is_empty());
        assert_eq!(c.photorefraction.len(), 3);
        assert_eq!(c.material.modes.len(), 2);
        assert_eq!(c.fpi_trace, FpiTraceRun::default());
        let material = Arc::new(c.material_model().unwrap());
        assert_eq!(c.fpi_cavity(material).unwrap().length_mm, 15.0);
        assert!(c.coupler.is_none());
    }

    #[test]
    fn zero_b_and_c_names_the_section() {
        let text = format!(
            "{MINIMAL}\n[[photorefraction]]\ntemperature_c = 30.0\na = 1e-5\nb = 0.0\nc = 0.0\n"
        );
        let err = parse_str(&text, "bad.toml", true).unwrap_err();
        match err {
            Error::Config { path, .. } => assert!(path.starts_with("photorefraction[0]"), "{path}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = parse_str(&text, "x.toml", true).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path.contains("bogus")), "{err}");
        let parsed = parse_str(&text, "x.toml", false).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn syntax_error_has_line_number() {
        let text = "[material]\ntemperature_reference_c = = 3\n";
        match parse_str(text, "s.toml", true).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "s.toml:2"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_reference_is_reported() {
        let text = format!("{MINIMAL}\n[coupler_sweep]\ntemperatures_c = [45.0]\n");
        match parse_str(&text, "r.toml", true).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "coupler_sweep.temperatures_c[0]"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn round_trip_and_hash() {
        let c = parse_str(MINIMAL, "m.toml", true).unwrap().config;
        let again = parse_str(&c.to_toml().unwrap(), "m2.toml", true).unwrap().config;
        assert_eq!(c, again);
        assert_eq!(c.hash().unwrap(), again.hash().unwrap());
        let mut changed = c.clone();
        changed.fpi.as_mut().unwrap().length_mm = 15.000000001;
        assert_ne!(c.hash().unwrap(), changed.hash().unwrap());
    }

    #[test]
    fn grid_values() {
        let g = Grid::new(0.0, 1.0, 11);
        let v = g.values();
        assert_eq!(v.len(), 11);
        assert_eq!(v[10], 1.0);
        assert!((v[3] - 0.3).abs() < 1e-15);
        assert!(Grid::new(1.0, 0.0, 3).check("g").is_err());
    }
}
