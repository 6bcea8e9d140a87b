//! Quasi-phase-matched down-conversion in a periodically poled waveguide
//! with a photorefractive shift of the pump index.

use std::f64::consts::{LOG10_E, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coupler::check_powers;
use crate::data::SweepData;
use crate::error::{Error, Result};
use crate::numeric::bisect;
use crate::material::{MaterialModel, ModeId, PhotorefractionParams, NIR_MODE, TELECOM_MODE};

/// Mode assignment of the three interacting fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmWaveguide {
    pub pump_mode: ModeId,
    pub signal_mode: ModeId,
    pub idler_mode: ModeId,
    /// Fraction of the pump-index shift also applied to signal and idler
    /// (0 = pump only).
    #[serde(default)]
    pub telecom_shift_scale: f64,
}

impl Default for QpmWaveguide {
    fn default() -> Self {
        QpmWaveguide {
            pump_mode: NIR_MODE.into(),
            signal_mode: TELECOM_MODE.into(),
            idler_mode: TELECOM_MODE.into(),
            telecom_shift_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpmDevice {
    pub poling_period_um: f64,
    pub length_mm: f64,
    pub waveguide: QpmWaveguide,
    pub material: Arc<MaterialModel>,
}

impl QpmDevice {
    pub fn new(
        poling_period_um: f64,
        length_mm: f64,
        waveguide: QpmWaveguide,
        material: Arc<MaterialModel>,
    ) -> Result<Self> {
        if !(poling_period_um.is_finite() && poling_period_um > 0.0) {
            return Err(Error::invalid("poling period must be positive"));
        }
        if !(length_mm.is_finite() && length_mm > 0.0) {
            return Err(Error::invalid("device length must be positive"));
        }
        for m in [&waveguide.pump_mode, &waveguide.signal_mode, &waveguide.idler_mode] {
            material.mode(m)?;
        }
        Ok(QpmDevice {
            poling_period_um,
            length_mm,
            waveguide,
            material,
        })
    }

    /// Device whose poling period phase-matches degenerate emission at
    /// `degeneracy_nm` for the given pump, temperature and pump-index shift.
    pub fn calibrated(
        length_mm: f64,
        waveguide: QpmWaveguide,
        material: Arc<MaterialModel>,
        temperature_c: f64,
        pump_nm: f64,
        degeneracy_nm: f64,
        pump_index_shift: f64,
    ) -> Result<Self> {
        let period = calibrate_poling_period(
            &material,
            &waveguide,
            temperature_c,
            pump_nm,
            degeneracy_nm,
            pump_index_shift,
        )?;
        Self::new(period, length_mm, waveguide, material)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcOperatingPoint {
    pub pump_wavelength_nm: f64,
    pub temperature_c: f64,
    pub pump_power_mw: f64,
}

impl SpdcOperatingPoint {
    pub fn validate(&self) -> Result<()> {
        if !(700.0..=800.0).contains(&self.pump_wavelength_nm) {
            return Err(Error::invalid(format!(
                "pump wavelength {} nm outside [700, 800] nm",
                self.pump_wavelength_nm
            )));
        }
        if !(self.pump_power_mw.is_finite() && self.pump_power_mw >= 0.0) {
            return Err(Error::invalid("pump power must be non-negative"));
        }
        Ok(())
    }
}

/// Idler wavelength from energy conservation 1/λ_p = 1/λ_s + 1/λ_i.
pub fn idler_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    let degenerate = 2.0 * pump_nm;
    if !(signal_nm > 0.7 * degenerate && signal_nm < 1.5 * degenerate) {
        return Err(Error::invalid(format!(
            "signal {signal_nm} nm outside ({}, {}) nm",
            0.7 * degenerate,
            1.5 * degenerate
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / signal_nm))
}

/// n_p/λ_p − n_s/λ_s − n_i/λ_i in µm⁻¹, with the given index shifts applied.
#[allow(clippy::too_many_arguments)]
fn phase_terms(
    material: &MaterialModel,
    waveguide: &QpmWaveguide,
    temperature_c: f64,
    pump_nm: f64,
    signal_nm: f64,
    idler_nm: f64,
    pump_shift: f64,
    swap_signal_idler: bool,
) -> Result<f64> {
    let telecom_shift = waveguide.telecom_shift_scale * pump_shift;
    let (signal_mode, idler_mode) = if swap_signal_idler {
        (&waveguide.idler_mode, &waveguide.signal_mode)
    } else {
        (&waveguide.signal_mode, &waveguide.idler_mode)
    };
    let n_p = material.refractive_index(pump_nm, temperature_c, &waveguide.pump_mode)? + pump_shift;
    let n_s = material.refractive_index(signal_nm, temperature_c, signal_mode)? + telecom_shift;
    let n_i = material.refractive_index(idler_nm, temperature_c, idler_mode)? + telecom_shift;
    let (lp, ls, li) = (pump_nm * 1e-3, signal_nm * 1e-3, idler_nm * 1e-3);
    Ok(n_p / lp - n_s / ls - n_i / li)
}

/// Poling period (µm) that phase-matches degenerate emission at
/// `degeneracy_nm`: Λ = 1/(n_p/λ_p − n_s/λ_s − n_i/λ_i).
pub fn calibrate_poling_period(
    material: &MaterialModel,
    waveguide: &QpmWaveguide,
    temperature_c: f64,
    pump_nm: f64,
    degeneracy_nm: f64,
    pump_index_shift: f64,
) -> Result<f64> {
    let idler_nm = idler_wavelength(pump_nm, degeneracy_nm)?;
    let d = phase_terms(
        material,
        waveguide,
        temperature_c,
        pump_nm,
        degeneracy_nm,
        idler_nm,
        pump_index_shift,
        false,
    )?;
    if !(d > 0.0) {
        return Err(Error::Numerical(format!(
            "dispersion cannot be quasi-phase-matched here (n_p/λ_p − Σ n/λ = {d} µm⁻¹)"
        )));
    }
    Ok(1.0 / d)
}

fn mismatch(
    device: &QpmDevice,
    point: &SpdcOperatingPoint,
    signal_nm: f64,
    pump_shift: f64,
    swap: bool,
) -> Result<f64> {
    let idler_nm = idler_wavelength(point.pump_wavelength_nm, signal_nm)?;
    let terms = phase_terms(
        &device.material,
        &device.waveguide,
        point.temperature_c,
        point.pump_wavelength_nm,
        signal_nm,
        idler_nm,
        pump_shift,
        swap,
    )?;
    Ok(2.0 * PI * (terms - 1.0 / device.poling_period_um) * 1e3)
}

/// Phase mismatch Δk (mm⁻¹) for signal wavelength `signal_nm`, with the
/// steady photorefractive shift at the operating pump power.
pub fn qpm_mismatch(
    device: &QpmDevice,
    point: &SpdcOperatingPoint,
    signal_nm: f64,
    photorefraction: &PhotorefractionParams,
) -> Result<f64> {
    point.validate()?;
    let shift = photorefraction.delta_n_steady(point.pump_power_mw);
    mismatch(device, point, signal_nm, shift, false)
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpdcSpectrum {
    pub wavelength_nm: Vec<f64>,
    pub normalized_density: Vec<f64>,
}

impl SpdcSpectrum {
    pub fn to_sweep(&self) -> Result<SweepData> {
        Ok(
            SweepData::new(self.wavelength_nm.clone(), self.normalized_density.clone())?
                .with_labels("wavelength_nm", "normalized_density"),
        )
    }
}

/// sinc²(ΔkL/2) spectrum over `signal_nm`, including the twin contribution
/// of the conjugate photon at the same wavelength, normalized to unit maximum
/// on the grid. `background` is a constant floor in normalized units.
pub fn spdc_spectrum(
    device: &QpmDevice,
    point: &SpdcOperatingPoint,
    photorefraction: &PhotorefractionParams,
    signal_nm: &[f64],
    background: f64,
) -> Result<SpdcSpectrum> {
    point.validate()?;
    if signal_nm.is_empty() {
        return Err(Error::invalid("empty wavelength grid"));
    }
    if !(0.0..1.0).contains(&background) {
        return Err(Error::invalid("background must lie in [0, 1)"));
    }
    let shift = photorefraction.delta_n_steady(point.pump_power_mw);
    let half_length = device.length_mm / 2.0;
    let mut raw = Vec::with_capacity(signal_nm.len());
    for &ls in signal_nm {
        let direct = sinc(mismatch(device, point, ls, shift, false)? * half_length);
        let twin = sinc(mismatch(device, point, ls, shift, true)? * half_length);
        raw.push(direct * direct + twin * twin);
    }
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Numerical("spectrum vanishes on the whole grid".into()));
    }
    Ok(SpdcSpectrum {
        wavelength_nm: signal_nm.to_vec(),
        normalized_density: raw
            .into_iter()
            .map(|v| v / peak * (1.0 - background) + background)
            .collect(),
    })
}

/// Signal wavelengths on `grid_nm` where Δk changes sign, refined by bisection.
pub fn phase_matched_signals(
    device: &QpmDevice,
    point: &SpdcOperatingPoint,
    photorefraction: &PhotorefractionParams,
    grid_nm: &[f64],
) -> Result<Vec<f64>> {
    let f = |ls: f64| qpm_mismatch(device, point, ls, photorefraction);
    let mut roots = Vec::new();
    let values = grid_nm.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
    for i in 1..grid_nm.len() {
        let (a, b) = (values[i - 1], values[i]);
        if a == 0.0 {
            roots.push(grid_nm[i - 1]);
        } else if a * b < 0.0 {
            roots.push(bisect(f, grid_nm[i - 1], grid_nm[i], 1e-9)?);
        }
    }
    Ok(roots)
}

/// Pump power in [0, `max_power_mw`] at which Δk vanishes at exact
/// degeneracy (λ_s = 2λ_p), if any.
pub fn degeneracy_power(
    device: &QpmDevice,
    temperature_c: f64,
    pump_nm: f64,
    photorefraction: &PhotorefractionParams,
    max_power_mw: f64,
) -> Result<Option<f64>> {
    let f = |p: f64| {
        let point = SpdcOperatingPoint {
            pump_wavelength_nm: pump_nm,
            temperature_c,
            pump_power_mw: p,
        };
        qpm_mismatch(device, &point, 2.0 * pump_nm, photorefraction)
    };
    let (f0, f1) = (f(0.0)?, f(max_power_mw)?);
    if f0 == 0.0 {
        return Ok(Some(0.0));
    }
    if f0 * f1 > 0.0 {
        return Ok(None);
    }
    bisect(f, 0.0, max_power_mw, 1e-12).map(Some)
}

/// Squeezing in dB for squeezing parameter s: 10·log₁₀(e^(−2s)).
pub fn squeezing_db(s: f64) -> f64 {
    -20.0 * LOG10_E * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezingCurves {
    pub ideal: SweepData,
    pub photorefractive: SweepData,
}

/// Single-mode squeezing against pump power: ideal s = μ₀√P, and with the
/// phase-matching penalty s = μ₀√P·|sinc(Δk(P)L/2)| at exact degeneracy.
pub fn effective_squeezing_vs_power(
    device: &QpmDevice,
    temperature_c: f64,
    pump_nm: f64,
    photorefraction: &PhotorefractionParams,
    mu0: f64,
    powers_mw: &[f64],
) -> Result<SqueezingCurves> {
    if !(mu0.is_finite() && mu0 > 0.0) {
        return Err(Error::invalid("nonlinear efficiency must be positive"));
    }
    check_powers(powers_mw)?;
    let mut ideal = Vec::with_capacity(powers_mw.len());
    let mut degraded = Vec::with_capacity(powers_mw.len());
    for &p in powers_mw {
        let s = mu0 * p.sqrt();
        let point = SpdcOperatingPoint {
            pump_wavelength_nm: pump_nm,
            temperature_c,
            pump_power_mw: p,
        };
        let dk = qpm_mismatch(device, &point, 2.0 * pump_nm, photorefraction)?;
        ideal.push(squeezing_db(s));
        degraded.push(squeezing_db(s * sinc(dk * device.length_mm / 2.0).abs()));
    }
    Ok(SqueezingCurves {
        ideal: SweepData::new(powers_mw.to_vec(), ideal)?
            .with_labels("pump_power_mW", "squeezing_ideal_dB"),
        photorefractive: SweepData::new(powers_mw.to_vec(), degraded)?
            .with_labels("pump_power_mW", "squeezing_photorefractive_dB"),
    })
}
