//! Evanescent directional couplers with a pump-induced propagation-constant
//! mismatch, and the homodyne noise that follows from an unbalanced split.

use std::f64::consts::{LOG10_E, PI};

use serde::{Deserialize, Serialize};

use crate::data::SweepData;
use crate::error::{Error, Result};
use crate::material::PhotorefractionParams;

/// Tolerance on R(Δβ = 0) = 1/2 for a homodyne coupler.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerGeometry {
    /// mm⁻¹
    pub coupling_constant: f64,
    pub interaction_length_mm: f64,
    /// Center-to-center separation; metadata only.
    pub waveguide_separation_um: f64,
    pub design_wavelength_nm: f64,
}

impl CouplerGeometry {
    pub fn new(coupling_constant: f64, interaction_length_mm: f64) -> Result<Self> {
        let g = CouplerGeometry {
            coupling_constant,
            interaction_length_mm,
            waveguide_separation_um: 14.0,
            design_wavelength_nm: 1550.0,
        };
        g.validate()?;
        Ok(g)
    }

    /// A 50/50 coupler of length 3L_c/2.
    pub fn balanced(coupling_constant: f64) -> Result<Self> {
        let lc = coupling_length(coupling_constant)?;
        Self::new(coupling_constant, 1.5 * lc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_constant.is_finite() && self.coupling_constant > 0.0) {
            return Err(Error::invalid("coupling constant must be positive"));
        }
        if !(self.interaction_length_mm.is_finite() && self.interaction_length_mm > 0.0) {
            return Err(Error::invalid("interaction length must be positive"));
        }
        Ok(())
    }

    pub fn coupling_length_mm(&self) -> f64 {
        PI / (2.0 * self.coupling_constant)
    }

    /// Fraction of probe power left in the input (reflection) arm.
    pub fn reflectivity(&self, delta_beta: f64) -> f64 {
        coupler_reflectivity(self, delta_beta)
    }
}

/// L_c = π/(2k).
pub fn coupling_length(coupling_constant: f64) -> Result<f64> {
    if !(coupling_constant.is_finite() && coupling_constant > 0.0) {
        return Err(Error::invalid("coupling constant must be positive"));
    }
    Ok(PI / (2.0 * coupling_constant))
}

/// R = 1 − 4k²/(4k² + Δβ²) · sin²(L√(4k² + Δβ²)/2).
pub fn coupler_reflectivity(geometry: &CouplerGeometry, delta_beta: f64) -> f64 {
    let four_k2 = 4.0 * geometry.coupling_constant * geometry.coupling_constant;
    let q2 = four_k2 + delta_beta * delta_beta;
    let s = (geometry.interaction_length_mm * q2.sqrt() / 2.0).sin();
    (1.0 - four_k2 / q2 * s * s).clamp(0.0, 1.0)
}

/// Propagation-constant mismatch 2π|Δn|/λ, mm⁻¹.
pub fn delta_beta(delta_n: f64, wavelength_nm: f64) -> f64 {
    2.0 * PI * delta_n.abs() / (wavelength_nm * 1e-6)
}

/// Probe reflectivity against pump power in the reflection arm.
pub fn reflectivity_vs_pump(
    geometry: &CouplerGeometry,
    params: &PhotorefractionParams,
    probe_wavelength_nm: f64,
    pump_powers_mw: &[f64],
) -> Result<SweepData> {
    check_powers(pump_powers_mw)?;
    let r = pump_powers_mw
        .iter()
        .map(|&p| {
            let db = delta_beta(params.delta_n_steady(p), probe_wavelength_nm);
            coupler_reflectivity(geometry, db)
        })
        .collect();
    Ok(SweepData::new(pump_powers_mw.to_vec(), r)?.with_labels("pump_power_mW", "reflectivity"))
}

pub(crate) fn check_powers(powers: &[f64]) -> Result<()> {
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("pump powers must be finite and non-negative"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneConfig {
    /// Coupler power reflectivity R; transmissivity is 1 − R.
    pub reflectivity: f64,
    /// |α|², local-oscillator photon flux.
    pub lo_amplitude_sq: f64,
    /// s ≥ 0; the squeezed quadrature has variance e^(−2s).
    pub squeezing_parameter: f64,
    /// LO phase φ relative to the squeezed quadrature, rad.
    pub phase: f64,
}

impl HomodyneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(Error::invalid("reflectivity must lie in [0, 1]"));
        }
        if !(self.lo_amplitude_sq.is_finite() && self.lo_amplitude_sq > 0.0) {
            return Err(Error::invalid("LO power must be positive"));
        }
        if !(self.squeezing_parameter.is_finite() && self.squeezing_parameter >= 0.0) {
            return Err(Error::invalid("squeezing parameter must be non-negative"));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase must be finite"));
        }
        Ok(())
    }

    pub fn transmissivity(&self) -> f64 {
        1.0 - self.reflectivity
    }
}

/// Difference-photocurrent variance
/// |α|²[(T − R)² + 4RT(e^{2s} sin²φ + e^{−2s} cos²φ)], leading order in |α|.
pub fn homodyne_noise(config: &HomodyneConfig) -> f64 {
    let r = config.reflectivity;
    let t = config.transmissivity();
    let s = config.squeezing_parameter;
    let (sin, cos) = config.phase.sin_cos();
    let quadrature = (2.0 * s).exp() * sin * sin + (-2.0 * s).exp() * cos * cos;
    config.lo_amplitude_sq * ((t - r) * (t - r) + 4.0 * r * t * quadrature)
}

/// Squeezing parameter for a level in dB (negative below shot noise).
pub fn squeezing_parameter_from_db(level_db: f64) -> f64 {
    -level_db / (20.0 * LOG10_E)
}

pub fn variance_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Squeezing an ideal homodyne detector would report when residual pump in
/// its coupler shifts the split ratio; φ = 0 throughout.
///
/// The shot-noise reference is taken at R(0) or, with
/// `pump_during_calibration`, at R(P).
pub fn measured_squeezing_vs_residual_pump(
    geometry: &CouplerGeometry,
    params: &PhotorefractionParams,
    probe_wavelength_nm: f64,
    initial_squeezing_db: f64,
    pump_powers_mw: &[f64],
    pump_during_calibration: bool,
) -> Result<SweepData> {
    check_powers(pump_powers_mw)?;
    if !(initial_squeezing_db.is_finite() && initial_squeezing_db <= 0.0) {
        return Err(Error::invalid("initial squeezing must be ≤ 0 dB"));
    }
    let r0 = coupler_reflectivity(geometry, 0.0);
    if (r0 - 0.5).abs() > BALANCE_TOLERANCE {
        return Err(Error::invalid(format!(
            "homodyne coupler is unbalanced without pump (R = {r0})"
        )));
    }
    let s = squeezing_parameter_from_db(initial_squeezing_db);
    let level = |reflectivity: f64, s: f64| {
        homodyne_noise(&HomodyneConfig {
            reflectivity,
            lo_amplitude_sq: 1.0,
            squeezing_parameter: s,
            phase: 0.0,
        })
    };
    let db = pump_powers_mw
        .iter()
        .map(|&p| {
            let r = coupler_reflectivity(
                geometry,
                delta_beta(params.delta_n_steady(p), probe_wavelength_nm),
            );
            let shot = if pump_during_calibration {
                level(r, 0.0)
            } else {
                level(r0, 0.0)
            };
            variance_to_db(level(r, s) / shot)
        })
        .collect();
    Ok(SweepData::new(pump_powers_mw.to_vec(), db)?
        .with_labels("pump_power_mW", "measured_squeezing_dB"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_coupler() -> CouplerGeometry {
        CouplerGeometry::new(0.46, 4.3).unwrap()
    }

    fn room() -> PhotorefractionParams {
        PhotorefractionParams::new(30.0, 1.15e-5, 1.0, 0.002).unwrap()
    }

    #[test]
    fn coupling_length_examples() {
        let lc = coupling_length(0.46).unwrap();
        assert!((lc - 3.4147).abs() < 1e-4);
        assert!(((lc - 3.43) / 3.43).abs() < 0.005);
        assert!((coupling_length(0.92).unwrap() - lc / 2.0).abs() < 1e-12);
        let k = PI / (2.0 * 2.96);
        assert!((k - 0.531).abs() < 5e-4);
        assert!(coupling_length(0.0).is_err());
    }

    #[test]
    fn reflectivity_examples() {
        let g = CouplerGeometry::new(0.46, coupling_length(0.46).unwrap()).unwrap();
        assert!(g.reflectivity(0.0) < 1e-15);
        let r = paper_coupler().reflectivity(0.0);
        let expect = 1.0 - (0.46f64 * 4.3).sin().powi(2);
        assert!((r - expect).abs() < 1e-15);
        assert!((r - 0.154).abs() < 0.005);
        assert!(paper_coupler().reflectivity(1e4) > 0.9999);
    }

    #[test]
    fn reflectivity_periodic_in_length() {
        let k = 0.46;
        let lc = coupling_length(k).unwrap();
        for m in 0..4 {
            let even = CouplerGeometry::new(k, (2 * m + 2) as f64 * lc).unwrap();
            let odd = CouplerGeometry::new(k, (2 * m + 1) as f64 * lc).unwrap();
            assert!((even.reflectivity(0.0) - 1.0).abs() < 1e-12);
            assert!(odd.reflectivity(0.0) < 1e-12);
        }
    }

    #[test]
    fn pump_sweep() {
        let g = paper_coupler();
        let flat = reflectivity_vs_pump(
            &g,
            &PhotorefractionParams::new(30.0, 0.0, 1.0, 0.0).unwrap(),
            1550.0,
            &[0.0, 5.0, 10.0],
        )
        .unwrap();
        assert!(flat.value().iter().all(|&r| r == g.reflectivity(0.0)));
        // |Δn| = 1e-4 at 1550 nm gives Δβ = 0.405 mm⁻¹
        assert!((delta_beta(-1e-4, 1550.0) - 0.4054).abs() < 1e-4);
        let p = PhotorefractionParams::new(30.0, 1.0e-5, 1.0, 0.0).unwrap();
        let sweep = reflectivity_vs_pump(&g, &p, 1550.0, &[10.0]).unwrap();
        let db = 2.0 * PI * 1e-4 / 1550e-6;
        let q = (4.0 * 0.46f64 * 0.46 + db * db).sqrt();
        let expect = 1.0 - 4.0 * 0.46 * 0.46 / (q * q) * (4.3 * q / 2.0).sin().powi(2);
        assert!((sweep.value()[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn homodyne_identities() {
        let alpha2 = 3.7;
        for &r in &[0.0, 0.2, 0.5, 0.9] {
            for &phi in &[0.0, 0.4, 2.0] {
                let v = homodyne_noise(&HomodyneConfig {
                    reflectivity: r,
                    lo_amplitude_sq: alpha2,
                    squeezing_parameter: 0.0,
                    phase: phi,
                });
                assert!((v - alpha2).abs() < 1e-12);
            }
        }
        let s = 0.8;
        let v = homodyne_noise(&HomodyneConfig {
            reflectivity: 0.5,
            lo_amplitude_sq: alpha2,
            squeezing_parameter: s,
            phase: 0.0,
        });
        assert!((v - alpha2 * (-2.0 * s).exp()).abs() < 1e-12);
    }

    #[test]
    fn db_conversion() {
        let s = squeezing_parameter_from_db(-5.0);
        assert!((s - 0.5756).abs() < 1e-4);
        assert!((variance_to_db((-2.0 * s).exp()) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn measured_squeezing_degrades() {
        let g = CouplerGeometry::balanced(0.46).unwrap();
        let powers: Vec<f64> = (0..=15).map(f64::from).collect();
        let p = room();
        let m10 =
            measured_squeezing_vs_residual_pump(&g, &p, 1550.0, -10.0, &powers, false).unwrap();
        let m3 = measured_squeezing_vs_residual_pump(&g, &p, 1550.0, -3.0, &powers, false).unwrap();
        assert!((m10.value()[0] + 10.0).abs() < 1e-4);
        for w in m10.value().windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
        for v in m10.value() {
            assert!(*v >= -10.0 - 1e-12);
        }
        let loss10 = m10.value()[10] + 10.0;
        let loss3 = m3.value()[10] + 3.0;
        assert!(loss10 > loss3);
        let with_cal =
            measured_squeezing_vs_residual_pump(&g, &p, 1550.0, -10.0, &powers, true).unwrap();
        for (a, b) in with_cal.value().iter().zip(m10.value()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unbalanced_design_rejected() {
        let r = measured_squeezing_vs_residual_pump(
            &paper_coupler(),
            &room(),
            1550.0,
            -5.0,
            &[0.0],
            false,
        );
        assert!(r.is_err());
    }
}
