//! Parasitic Fabry-Perot resonators formed by uncoated waveguide end-facets,
//! and the detuned below-threshold squeezer in [`opo`].

use std::f64::consts::PI;
use std::sync::Arc;

use crate::data::Trace;
use crate::error::{Error, Result};
use crate::material::{MaterialModel, ModeId, PhotorefractionParams, PumpSchedule};

pub mod opo;

pub use opo::{
    delta_n_to_detuning, opo_optimal_levels, opo_quadrature_spectrum, sigma_for_squeezing_db,
    spectrum_extremes, threshold, NormalizedDetuning, OptimalLevels, SqueezerCavity,
};

/// Wavelengths at or above this are treated as probe (telecom) band.
pub const PROBE_BAND_THRESHOLD_NM: f64 = 1000.0;

/// The two finesse figures in common use for a two-mirror resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Finesse {
    /// 4√(R₁R₂)/(1 − √(R₁R₂))², the factor in the Airy transmission.
    pub coefficient: f64,
    /// π(R₁R₂)^¼/(1 − √(R₁R₂)), free spectral range over linewidth.
    pub conventional: f64,
}

pub fn finesse(r1: f64, r2: f64) -> Result<Finesse> {
    for r in [r1, r2] {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::invalid(format!("reflectivity {r} not in [0, 1)")));
        }
    }
    let r = (r1 * r2).sqrt();
    Ok(Finesse {
        coefficient: 4.0 * r / ((1.0 - r) * (1.0 - r)),
        conventional: PI * r.sqrt() / (1.0 - r),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpiCavity {
    pub length_mm: f64,
    /// Per-facet power reflectivity at the probe (telecom) wavelength.
    pub facet_reflectivity_probe: f64,
    /// Per-facet power reflectivity at the pump wavelength.
    pub facet_reflectivity_pump: f64,
    /// Angle-polished facets suppress the resonator entirely.
    pub angled_facets: bool,
    pub probe_mode: ModeId,
    pub pump_mode: ModeId,
    pub material: Arc<MaterialModel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpiCharacteristics {
    pub free_spectral_range_pm: f64,
    /// Absent when the fringe contrast never drops below half maximum.
    pub fwhm_pm: Option<f64>,
    pub finesse: Finesse,
}

impl FpiCavity {
    pub fn new(
        length_mm: f64,
        facet_reflectivity_probe: f64,
        facet_reflectivity_pump: f64,
        material: Arc<MaterialModel>,
    ) -> Result<Self> {
        let cavity = FpiCavity {
            length_mm,
            facet_reflectivity_probe,
            facet_reflectivity_pump,
            angled_facets: false,
            probe_mode: crate::material::TELECOM_MODE.into(),
            pump_mode: crate::material::NIR_MODE.into(),
            material,
        };
        cavity.validate()?;
        Ok(cavity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_mm.is_finite() && self.length_mm > 0.0) {
            return Err(Error::invalid("cavity length must be positive"));
        }
        for r in [self.facet_reflectivity_probe, self.facet_reflectivity_pump] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::invalid(format!("facet reflectivity {r} not in [0, 1)")));
            }
        }
        self.material.mode(&self.probe_mode)?;
        self.material.mode(&self.pump_mode)?;
        Ok(())
    }

    pub fn angled(mut self) -> Self {
        self.angled_facets = true;
        self
    }

    fn is_probe_band(wavelength_nm: f64) -> bool {
        wavelength_nm >= PROBE_BAND_THRESHOLD_NM
    }

    pub fn facet_reflectivity(&self, wavelength_nm: f64) -> f64 {
        if Self::is_probe_band(wavelength_nm) {
            self.facet_reflectivity_probe
        } else {
            self.facet_reflectivity_pump
        }
    }

    pub fn mode(&self, wavelength_nm: f64) -> &ModeId {
        if Self::is_probe_band(wavelength_nm) {
            &self.probe_mode
        } else {
            &self.pump_mode
        }
    }

    pub fn effective_index(&self, wavelength_nm: f64, temperature_c: f64) -> Result<f64> {
        self.material
            .refractive_index(wavelength_nm, temperature_c, self.mode(wavelength_nm))
    }

    pub fn finesse(&self, wavelength_nm: f64) -> Finesse {
        let r = self.facet_reflectivity(wavelength_nm);
        finesse(r, r).expect("reflectivity validated at construction")
    }

    /// Single-pass phase 2πL(n_eff + Δn)/λ.
    pub fn round_trip_phase(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
        delta_n: f64,
    ) -> Result<f64> {
        let n = self.effective_index(wavelength_nm, temperature_c)?;
        Ok(2.0 * PI * self.length_mm * 1e6 * (n + delta_n) / wavelength_nm)
    }

    /// Airy transmission 1/(1 + 𝓕 sin²(2πL(n_eff + Δn)/λ)).
    pub fn transmission(&self, wavelength_nm: f64, temperature_c: f64, delta_n: f64) -> Result<f64> {
        let phase = self.round_trip_phase(wavelength_nm, temperature_c, delta_n)?;
        let f = self.finesse(wavelength_nm).coefficient;
        if self.angled_facets || f == 0.0 {
            return Ok(1.0);
        }
        Ok(airy(f, phase))
    }

    /// Free spectral range λ²/(2 n_eff L) and, when resolvable, the FWHM.
    pub fn characteristics(
        &self,
        wavelength_nm: f64,
        temperature_c: f64,
    ) -> Result<FpiCharacteristics> {
        let n = self.effective_index(wavelength_nm, temperature_c)?;
        let fsr_nm = wavelength_nm * wavelength_nm / (2.0 * n * self.length_mm * 1e6);
        let finesse = self.finesse(wavelength_nm);
        let fwhm_pm = (finesse.coefficient > 1.0).then(|| fsr_nm * 1e3 / finesse.conventional);
        Ok(FpiCharacteristics {
            free_spectral_range_pm: fsr_nm * 1e3,
            fwhm_pm,
            finesse,
        })
    }

    /// Index change that moves the transmission by half an oscillation, λ/(4L).
    pub fn half_period_delta_n(&self, wavelength_nm: f64) -> f64 {
        wavelength_nm / (4.0 * self.length_mm * 1e6)
    }
}

pub(crate) fn airy(coefficient: f64, phase: f64) -> f64 {
    let s = phase.sin();
    1.0 / (1.0 + coefficient * s * s)
}

/// Probe transmission sampled every `sample_period_s` from t = 0 to the
/// schedule horizon, with Δn following the temporal photorefraction model.
/// Values are normalized to the pre-pump (Δn = 0) transmission; samples in
/// mode-hopping segments are masked.
pub fn simulate_fpi_trace(
    cavity: &FpiCavity,
    params: &PhotorefractionParams,
    schedule: &PumpSchedule,
    probe_wavelength_nm: f64,
    temperature_c: f64,
    sample_period_s: f64,
) -> Result<Trace> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty pump schedule"));
    }
    if !(sample_period_s.is_finite() && sample_period_s > 0.0) {
        return Err(Error::invalid("sample period must be positive"));
    }
    let reference = cavity.transmission(probe_wavelength_nm, temperature_c, 0.0)?;
    let steps = (schedule.horizon_s() / sample_period_s).floor() as usize;
    let mut time = Vec::with_capacity(steps + 1);
    let mut value = Vec::with_capacity(steps + 1);
    let mut masked = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * sample_period_s;
        let dn = params.delta_n_temporal(schedule, t);
        time.push(t);
        value.push(cavity.transmission(probe_wavelength_nm, temperature_c, dn)? / reference);
        masked.push(schedule.is_mode_hopping(t));
    }
    Trace::new(time, value)?.with_mask(masked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::PumpSegment;

    fn cavity() -> FpiCavity {
        FpiCavity::new(
            15.0,
            0.14,
            0.13,
            Arc::new(MaterialModel::lithium_niobate_waveguide()),
        )
        .unwrap()
    }

    #[test]
    fn finesse_examples() {
        let f = finesse(0.14, 0.14).unwrap();
        assert!((f.coefficient - 4.0 * 0.14 / (0.86 * 0.86)).abs() < 1e-12);
        assert!((f.coefficient - 0.757).abs() < 1e-3);
        let f = finesse(0.13, 0.13).unwrap();
        assert!((f.conventional - 1.30).abs() < 0.005, "{}", f.conventional);
        assert_eq!(
            finesse(0.0, 0.0).unwrap(),
            Finesse {
                coefficient: 0.0,
                conventional: 0.0
            }
        );
        assert!(finesse(1.0, 0.5).is_err());
    }

    #[test]
    fn transmission_at_resonance_and_antiresonance() {
        let c = cavity();
        let n = c.effective_index(1550.0, 30.0).unwrap();
        let l_nm = 15.0e6;
        // phase = mπ: choose the integer m nearest the unperturbed phase
        let m = (2.0 * l_nm * n / 1550.0).round();
        let dn = m * 1550.0 / (2.0 * l_nm) - n;
        assert_eq!(c.transmission(1550.0, 30.0, dn).unwrap(), 1.0);
        let dn_anti = (m + 0.5) * 1550.0 / (2.0 * l_nm) - n;
        let t = c.transmission(1550.0, 30.0, dn_anti).unwrap();
        let f = 4.0 * 0.14 / (0.86 * 0.86);
        assert!((t - 1.0 / (1.0 + f)).abs() < 1e-6);
        assert!((t - 0.569).abs() < 1e-3);
    }

    #[test]
    fn half_period_matches_quoted_index_step() {
        let c = cavity();
        let step = c.half_period_delta_n(1550.0);
        assert!((step - 2.583e-5).abs() < 1e-8);
        assert!(((step - 2.6e-5) / 2.6e-5).abs() < 0.02);
    }

    #[test]
    fn transmission_periodic_in_delta_n() {
        let c = cavity();
        let period = 1550.0 / (2.0 * 15.0e6);
        for i in 0..20 {
            let dn = i as f64 * 1.3e-6;
            let base = c.transmission(1550.0, 30.0, dn).unwrap();
            for k in 1..=3 {
                let shifted = c.transmission(1550.0, 30.0, dn + k as f64 * period).unwrap();
                assert!((base - shifted).abs() < 1e-8);
            }
            assert!(base > 0.0 && base <= 1.0);
        }
    }

    #[test]
    fn angled_facets_bypass_cavity() {
        let c = cavity().angled();
        for dn in [0.0, 1e-5, 3.3e-5] {
            assert_eq!(c.transmission(1550.0, 30.0, dn).unwrap(), 1.0);
        }
    }

    #[test]
    fn free_spectral_range() {
        let c = cavity();
        let ch = c.characteristics(1550.0, 30.0).unwrap();
        assert!((ch.free_spectral_range_pm - 37.6).abs() < 0.05);
        assert!(ch.fwhm_pm.is_none());
        let ch = c.characteristics(775.0, 30.0).unwrap();
        assert!((ch.free_spectral_range_pm - 9.18).abs() < 0.02);
        assert!(ch.fwhm_pm.is_none());
    }

    #[test]
    fn fwhm_reported_for_high_finesse() {
        let mut c = cavity();
        c.facet_reflectivity_probe = 0.9;
        let ch = c.characteristics(1550.0, 30.0).unwrap();
        let fwhm = ch.fwhm_pm.unwrap();
        assert!((fwhm - ch.free_spectral_range_pm / ch.finesse.conventional).abs() < 1e-12);
    }

    #[test]
    fn zero_power_trace_is_flat() {
        let c = cavity();
        let p = PhotorefractionParams::new(30.0, 1.15e-5, 1.0, 0.002).unwrap();
        let s = PumpSchedule::new(vec![PumpSegment::dark(0.0, 30.0)]).unwrap();
        let trace = simulate_fpi_trace(&c, &p, &s, 1550.0, 30.0, 0.1).unwrap();
        assert!(trace.value().iter().all(|&v| v == 1.0));
        assert!(simulate_fpi_trace(&c, &p, &PumpSchedule::default(), 1550.0, 30.0, 0.1).is_err());
    }
}
