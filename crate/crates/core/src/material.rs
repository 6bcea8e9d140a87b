//! Refractive-index dispersion of congruent lithium niobate, guided-mode
//! effective indices and the photorefractive index-shift model.
//!
//! The bulk extraordinary index follows the temperature-dependent Sellmeier
//! form of Jundt (Opt. Lett. 22, 1553, 1997):
//!
//! ```text
//! n² = a1 + b1·f + (a2 + b2·f)/(λ² − (a3 + b3·f)²) + (a4 + b4·f)/(λ² − a5²) − a6·λ²
//! f  = (T − 24.5)(T + 570.82)
//! ```
//!
//! with λ in µm and T in °C. Waveguide confinement is folded into a constant
//! additive offset per guided mode, calibrated against a target effective
//! index at one wavelength and temperature.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated wavelength range of the dispersion model, nm.
pub const WAVELENGTH_RANGE_NM: (f64, f64) = (400.0, 2000.0);
/// Validated temperature range of the dispersion model, °C.
pub const TEMPERATURE_RANGE_C: (f64, f64) = (20.0, 200.0);

/// Name of the always-present zero-offset mode.
pub const BULK_MODE: &str = "bulk";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeId(pub String);

impl ModeId {
    pub fn new(id: impl Into<String>) -> Self {
        ModeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModeId {
    fn from(s: &str) -> Self {
        ModeId(s.to_owned())
    }
}

/// Temperature-dependent Sellmeier coefficients (λ in µm, T in °C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sellmeier {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// f = (T − t_zero)(T + t_shift)
    pub t_zero: f64,
    pub t_shift: f64,
}

impl Sellmeier {
    /// Extraordinary index of congruent LiNbO₃ (Jundt 1997).
    pub const CONGRUENT_EXTRAORDINARY: Sellmeier = Sellmeier {
        a1: 5.35583,
        a2: 0.100473,
        a3: 0.20692,
        a4: 100.0,
        a5: 11.34927,
        a6: 1.5334e-2,
        b1: 4.629e-7,
        b2: 3.862e-8,
        b3: -0.89e-8,
        b4: 2.657e-5,
        t_zero: 24.5,
        t_shift: 570.82,
    };

    pub fn index(&self, wavelength_um: f64, temperature_c: f64) -> f64 {
        let f = (temperature_c - self.t_zero) * (temperature_c + self.t_shift);
        let l2 = wavelength_um * wavelength_um;
        let uv = self.a3 + self.b3 * f;
        let n2 = self.a1
            + self.b1 * f
            + (self.a2 + self.b2 * f) / (l2 - uv * uv)
            + (self.a4 + self.b4 * f) / (l2 - self.a5 * self.a5)
            - self.a6 * l2;
        n2.sqrt()
    }
}

impl Default for Sellmeier {
    fn default() -> Self {
        Self::CONGRUENT_EXTRAORDINARY
    }
}

/// Wavelength band a guided mode is defined over, nm (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min_nm: f64,
    pub max_nm: f64,
}

impl Band {
    pub const FULL: Band = Band {
        min_nm: WAVELENGTH_RANGE_NM.0,
        max_nm: WAVELENGTH_RANGE_NM.1,
    };

    pub fn contains(&self, wavelength_nm: f64) -> bool {
        wavelength_nm >= self.min_nm && wavelength_nm <= self.max_nm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedMode {
    pub band: Band,
    /// Additive offset on top of the bulk index.
    pub offset: f64,
}

/// Bulk dispersion plus per-mode effective-index offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    sellmeier: Sellmeier,
    temperature_reference_c: f64,
    modes: BTreeMap<ModeId, GuidedMode>,
}

impl MaterialModel {
    pub fn new(sellmeier: Sellmeier, temperature_reference_c: f64) -> Result<Self> {
        check_range("temperature", temperature_reference_c, TEMPERATURE_RANGE_C)?;
        let mut modes = BTreeMap::new();
        modes.insert(
            ModeId::new(BULK_MODE),
            GuidedMode {
                band: Band::FULL,
                offset: 0.0,
            },
        );
        Ok(MaterialModel {
            sellmeier,
            temperature_reference_c,
            modes,
        })
    }

    /// Congruent LiNbO₃ with the 1550 nm / 775 nm fundamental modes calibrated
    /// to n_eff = 2.13 and 2.18 at 30 °C.
    pub fn lithium_niobate_waveguide() -> Self {
        let mut model = MaterialModel::new(Sellmeier::default(), 30.0)
            .expect("reference temperature in range");
        model
            .calibrate_mode(ModeId::new(TELECOM_MODE), Band::TELECOM, 1550.0, 2.13)
            .expect("telecom calibration in range");
        model
            .calibrate_mode(ModeId::new(NIR_MODE), Band::NIR, 775.0, 2.18)
            .expect("nir calibration in range");
        model
    }

    pub fn sellmeier(&self) -> &Sellmeier {
        &self.sellmeier
    }

    pub fn temperature_reference_c(&self) -> f64 {
        self.temperature_reference_c
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeId, &GuidedMode)> {
        self.modes.iter()
    }

    pub fn mode(&self, id: &ModeId) -> Result<&GuidedMode> {
        self.modes
            .get(id)
            .ok_or_else(|| Error::UnknownMode(id.to_string()))
    }

    /// Registers (or replaces) a mode with an explicit offset.
    pub fn insert_mode(&mut self, id: ModeId, band: Band, offset: f64) -> Result<()> {
        if !offset.is_finite() || band.min_nm > band.max_nm {
            return Err(Error::invalid(format!("mode `{id}`: bad band or offset")));
        }
        self.modes.insert(id, GuidedMode { band, offset });
        Ok(())
    }

    /// Sets the mode's offset so that its index at (`wavelength_nm`, reference
    /// temperature) equals `target` exactly.
    pub fn calibrate_mode(
        &mut self,
        id: ModeId,
        band: Band,
        wavelength_nm: f64,
        target: f64,
    ) -> Result<f64> {
        if !band.contains(wavelength_nm) {
            return Err(Error::invalid(format!(
                "mode `{id}`: calibration wavelength {wavelength_nm} nm outside its band"
            )));
        }
        let bulk = self.bulk_index(wavelength_nm, self.temperature_reference_c)?;
        // bulk and target are within a factor of two, so the difference is
        // exact and bulk + offset reproduces target bit-for-bit.
        let offset = target - bulk;
        self.insert_mode(id, band, offset)?;
        Ok(offset)
    }

    pub fn bulk_index(&self, wavelength_nm: f64, temperature_c: f64) -> Result<f64> {
        check_range("wavelength_nm", wavelength_nm, WAVELENGTH_RANGE_NM)?;
        check_range("temperature_c", temperature_c, TEMPERATURE_RANGE_C)?;
        Ok(self.sellmeier.index(wavelength_nm * 1e-3, temperature_c))
    }

    /// Effective index of `mode` at the given wavelength and temperature.
    pub fn refractive_index(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        mode: &ModeId,
    ) -> Result<f64> {
        let guided = self.mode(mode)?;
        if !guided.band.contains(wavelength_nm) {
            return Err(Error::OutOfRange {
                quantity: "wavelength_nm (mode band)",
                value: wavelength_nm,
                min: guided.band.min_nm,
                max: guided.band.max_nm,
            });
        }
        Ok(self.bulk_index(wavelength_nm, temperature_c)? + guided.offset)
    }
}

pub const TELECOM_MODE: &str = "te00-telecom";
pub const NIR_MODE: &str = "te00-nir";

impl Band {
    pub const TELECOM: Band = Band {
        min_nm: 1000.0,
        max_nm: 2000.0,
    };
    pub const NIR: Band = Band {
        min_nm: 400.0,
        max_nm: 1000.0,
    };
}

fn check_range(quantity: &'static str, value: f64, (min, max): (f64, f64)) -> Result<()> {
    if value.is_finite() && value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            quantity,
            value,
            min,
            max,
        })
    }
}

/// Saturable steady-state law Δn(P) = −aP/(b + cP) plus the time constants
/// of the space-charge field, for one temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotorefractionParams {
    pub temperature_c: f64,
    pub a: f64,
    /// mW
    pub b: f64,
    pub c: f64,
    pub tau_build_s: f64,
    pub tau_dark_s: f64,
    pub tau_erase_s: f64,
}

impl PhotorefractionParams {
    pub const DEFAULT_TAU_BUILD_S: f64 = 5.0;
    pub const DEFAULT_TAU_DARK_S: f64 = 1.0e4;
    pub const DEFAULT_TAU_ERASE_S: f64 = 10.0;

    pub fn new(temperature_c: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        Self {
            temperature_c,
            a,
            b,
            c,
            tau_build_s: Self::DEFAULT_TAU_BUILD_S,
            tau_dark_s: Self::DEFAULT_TAU_DARK_S,
            tau_erase_s: Self::DEFAULT_TAU_ERASE_S,
        }
        .validated()
    }

    pub fn with_time_constants(mut self, build: f64, dark: f64, erase: f64) -> Result<Self> {
        self.tau_build_s = build;
        self.tau_dark_s = dark;
        self.tau_erase_s = erase;
        self.validated()
    }

    /// Checks the invariants; returns the reason on failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        let all = [
            self.temperature_c,
            self.a,
            self.b,
            self.c,
            self.tau_build_s,
            self.tau_dark_s,
            self.tau_erase_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.a < 0.0 || self.b < 0.0 || self.c < 0.0 {
            return Err("a, b, c must be non-negative".into());
        }
        // b + cP > 0 for all P >= 0 needs b > 0 (P = 0).
        if self.b <= 0.0 {
            return Err("b must be positive so that b + c·P > 0 for all P ≥ 0".into());
        }
        if self.tau_build_s <= 0.0 || self.tau_dark_s <= 0.0 || self.tau_erase_s <= 0.0 {
            return Err("time constants must be positive".into());
        }
        if self.tau_erase_s >= self.tau_dark_s {
            return Err("tau_erase must be shorter than tau_dark".into());
        }
        Ok(())
    }

    fn validated(self) -> Result<Self> {
        self.check().map_err(Error::Invalid)?;
        Ok(self)
    }

    /// Steady-state index shift under constant pump power (≤ 0).
    pub fn delta_n_steady(&self, pump_mw: f64) -> f64 {
        debug_assert!(pump_mw >= 0.0, "pump power must be non-negative");
        -self.a * pump_mw / (self.b + self.c * pump_mw)
    }

    /// Small-signal slope a/b, index shift per mW.
    pub fn linear_slope(&self) -> f64 {
        self.a / self.b
    }

    /// Saturation value −a/c, if the law saturates.
    pub fn saturation(&self) -> Option<f64> {
        (self.c > 0.0).then(|| -self.a / self.c)
    }

    /// Index shift at time `t_s` under `schedule`, starting from Δn = 0 at t = 0.
    ///
    /// Each phase is a first-order relaxation toward its target: pump on
    /// relaxes toward [`delta_n_steady`](Self::delta_n_steady) with
    /// `tau_build`, darkness toward 0 with `tau_dark`, erasing light toward 0
    /// with `tau_erase`. Gaps between segments are dark; the last segment is
    /// extended past the end of the schedule.
    pub fn delta_n_temporal(&self, schedule: &PumpSchedule, t_s: f64) -> f64 {
        let mut dn = 0.0;
        let mut now = 0.0;
        for phase in schedule.phases() {
            if t_s <= now {
                break;
            }
            let end = phase.end.min(t_s);
            let (target, tau) = match phase.state {
                Illumination::Dark => (0.0, self.tau_dark_s),
                Illumination::Erase => (0.0, self.tau_erase_s),
                Illumination::Pump(p) => (self.delta_n_steady(p), self.tau_build_s),
            };
            if end > now {
                dn = target + (dn - target) * (-(end - now) / tau).exp();
            }
            now = end;
        }
        dn
    }
}

/// One interval of a pump schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSegment {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub pump_mw: f64,
    #[serde(default)]
    pub erasing_light: bool,
    /// Marks an interval affected by pump mode hopping; not modeled, only
    /// propagated as a mask to simulated traces.
    #[serde(default)]
    pub mode_hopping: bool,
}

impl PumpSegment {
    pub fn pump(start_s: f64, end_s: f64, pump_mw: f64) -> Self {
        PumpSegment {
            start_s,
            end_s,
            pump_mw,
            erasing_light: false,
            mode_hopping: false,
        }
    }

    pub fn dark(start_s: f64, end_s: f64) -> Self {
        Self::pump(start_s, end_s, 0.0)
    }

    pub fn erase(start_s: f64, end_s: f64) -> Self {
        PumpSegment {
            erasing_light: true,
            ..Self::pump(start_s, end_s, 0.0)
        }
    }

    fn state(&self) -> Illumination {
        if self.erasing_light {
            Illumination::Erase
        } else if self.pump_mw > 0.0 {
            Illumination::Pump(self.pump_mw)
        } else {
            Illumination::Dark
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Illumination {
    Dark,
    Erase,
    Pump(f64),
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    end: f64,
    state: Illumination,
}

/// Ordered, non-overlapping sequence of pump/erase segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PumpSchedule {
    segments: Vec<PumpSegment>,
}

impl PumpSchedule {
    pub fn new(segments: Vec<PumpSegment>) -> Result<Self> {
        let schedule = PumpSchedule { segments };
        schedule.check().map_err(Error::Invalid)?;
        Ok(schedule)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let mut previous_end = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start_s.is_finite() && seg.end_s.is_finite() && seg.pump_mw.is_finite()) {
                return Err(format!("segment {i}: non-finite value"));
            }
            if seg.start_s < 0.0 || seg.pump_mw < 0.0 {
                return Err(format!("segment {i}: negative time or power"));
            }
            if seg.start_s >= seg.end_s {
                return Err(format!("segment {i}: start must precede end"));
            }
            if seg.start_s < previous_end {
                return Err(format!("segment {i}: overlaps or precedes segment {}", i - 1));
            }
            previous_end = seg.end_s;
        }
        Ok(())
    }

    pub fn segments(&self) -> &[PumpSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// End time of the last segment (0 for an empty schedule).
    pub fn horizon_s(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_s)
    }

    pub fn is_mode_hopping(&self, t_s: f64) -> bool {
        self.segments
            .iter()
            .any(|s| s.mode_hopping && t_s >= s.start_s && t_s < s.end_s)
    }

    /// Contiguous phases covering [0, ∞): dark gaps are made explicit and the
    /// last segment extends to infinity.
    fn phases(&self) -> Vec<Phase> {
        let mut phases = Vec::with_capacity(2 * self.segments.len() + 1);
        let mut now = 0.0;
        for seg in &self.segments {
            if seg.start_s > now {
                phases.push(Phase {
                    end: seg.start_s,
                    state: Illumination::Dark,
                });
            }
            phases.push(Phase {
                end: seg.end_s,
                state: seg.state(),
            });
            now = seg.end_s;
        }
        match phases.last_mut() {
            Some(last) => last.end = f64::INFINITY,
            None => phases.push(Phase {
                end: f64::INFINITY,
                state: Illumination::Dark,
            }),
        }
        phases
    }
}

/// Photorefraction parameter sets keyed by temperature.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotorefractionTable {
    sets: Vec<PhotorefractionParams>,
}

impl PhotorefractionTable {
    pub fn new(mut sets: Vec<PhotorefractionParams>) -> Result<Self> {
        for s in &sets {
            s.check()
                .map_err(|m| Error::invalid(format!("{} °C: {m}", s.temperature_c)))?;
        }
        sets.sort_by(|x, y| x.temperature_c.total_cmp(&y.temperature_c));
        if sets
            .windows(2)
            .any(|w| (w[0].temperature_c - w[1].temperature_c).abs() < 1e-9)
        {
            return Err(Error::invalid("duplicate photorefraction temperature"));
        }
        Ok(PhotorefractionTable { sets })
    }

    /// Parameter sets approximating the coupler measurements at 30, 60 and
    /// 90 °C (slopes read off the published Δn(P) trends; b fixed to 1 mW).
    pub fn lithium_niobate_defaults() -> Self {
        let sets = [(30.0, 1.15e-5), (60.0, 4.0e-6), (90.0, 5.0e-9)]
            .into_iter()
            .map(|(t, a)| PhotorefractionParams::new(t, a, 1.0, 0.002).expect("valid defaults"))
            .collect();
        PhotorefractionTable::new(sets).expect("distinct temperatures")
    }

    pub fn at(&self, temperature_c: f64) -> Result<&PhotorefractionParams> {
        self.sets
            .iter()
            .find(|s| (s.temperature_c - temperature_c).abs() < 1e-9)
            .ok_or(Error::MissingTemperature(temperature_c))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PhotorefractionParams> {
        self.sets.iter()
    }
}
