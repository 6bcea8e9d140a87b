//! Quadrature noise spectra of a degenerate parametric oscillator below
//! threshold with intracavity detuning.
//!
//! Linearized intracavity quadratures q = (x, y), time in units of the
//! amplitude decay rate κ:
//!
//! ```text
//! dq/dt = A q + √2 q_in,   A = [[−1 − σ, Δ], [−Δ, −1 + σ]]
//! q_out = √2 q − q_in
//! ```
//!
//! so q_out(ω) = G(ω) q_in(ω) with G = −2 (A + iω)⁻¹ − 1. For vacuum input the
//! symmetrized output spectral matrix is Re(G G†), and the noise of the
//! quadrature at angle θ is uᵀ Re(G G†) u with u = (cos θ, sin θ).
//! Threshold is reached when the least-damped eigenvalue of A,
//! −1 + √(σ² − Δ²), crosses zero, i.e. σ = √(1 + Δ²).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialModel, ModeId};
use crate::numeric::golden_section;

const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Detuning divided by the cavity amplitude decay rate κ.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedDetuning(pub f64);

impl NormalizedDetuning {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Intentional squeezer resonator (mirror power reflectivities r1, r2).
#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerCavity {
    pub length_mm: f64,
    pub mirror_r1: f64,
    pub mirror_r2: f64,
    pub mode: ModeId,
    pub material: Arc<MaterialModel>,
}

impl SqueezerCavity {
    pub fn new(
        length_mm: f64,
        mirror_r1: f64,
        mirror_r2: f64,
        mode: ModeId,
        material: Arc<MaterialModel>,
    ) -> Result<Self> {
        let cavity = SqueezerCavity {
            length_mm,
            mirror_r1,
            mirror_r2,
            mode,
            material,
        };
        cavity.validate()?;
        Ok(cavity)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_mm.is_finite() && self.length_mm > 0.0) {
            return Err(Error::invalid("squeezer length must be positive"));
        }
        for r in [self.mirror_r1, self.mirror_r2] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(format!("mirror reflectivity {r} not in (0, 1)")));
            }
        }
        self.material.mode(&self.mode)?;
        Ok(())
    }

    /// Amplitude decay rate κ = (1 − √(r1 r2))/t_rt, rad/s.
    pub fn decay_rate(&self, wavelength_nm: f64) -> Result<f64> {
        let n = self.index(wavelength_nm)?;
        let round_trip_s = 2.0 * n * self.length_mm * 1e-3 / SPEED_OF_LIGHT_M_S;
        Ok((1.0 - (self.mirror_r1 * self.mirror_r2).sqrt()) / round_trip_s)
    }

    fn index(&self, wavelength_nm: f64) -> Result<f64> {
        self.material.refractive_index(
            wavelength_nm,
            self.material.temperature_reference_c(),
            &self.mode,
        )
    }
}

/// Resonance shift ω|Δn|/n_eff expressed in units of the cavity decay rate.
pub fn delta_n_to_detuning(
    cavity: &SqueezerCavity,
    delta_n: f64,
    wavelength_nm: f64,
) -> Result<NormalizedDetuning> {
    if !(delta_n.abs() < 1e-2) {
        return Err(Error::invalid(format!("|Δn| = {delta_n} must be below 1e-2")));
    }
    let n = cavity.index(wavelength_nm)?;
    let omega = 2.0 * PI * SPEED_OF_LIGHT_M_S / (wavelength_nm * 1e-9);
    let shift = omega * delta_n.abs() / n;
    Ok(NormalizedDetuning(shift / cavity.decay_rate(wavelength_nm)?))
}

/// Pump parameter that yields `squeezing_db` (< 0) at zero detuning and zero
/// analysis frequency: ((1 − σ)/(1 + σ))² = 10^(dB/10).
pub fn sigma_for_squeezing_db(squeezing_db: f64) -> Result<f64> {
    if !(squeezing_db.is_finite() && squeezing_db <= 0.0) {
        return Err(Error::invalid("squeezing level must be a finite value ≤ 0 dB"));
    }
    let ratio = 10f64.powf(squeezing_db / 20.0);
    Ok((1.0 - ratio) / (1.0 + ratio))
}

pub fn threshold(detuning: NormalizedDetuning) -> f64 {
    (1.0 + detuning.0 * detuning.0).sqrt()
}

fn check_operating_point(sigma: f64, detuning: NormalizedDetuning, eta: f64) -> Result<()> {
    if !detuning.0.is_finite() {
        return Err(Error::invalid("detuning must be finite"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::invalid("pump parameter must be non-negative"));
    }
    let th = threshold(detuning);
    if sigma >= th {
        return Err(Error::invalid(format!(
            "pump parameter {sigma} at or above threshold {th}"
        )));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid("detection efficiency must lie in [0, 1]"));
    }
    Ok(())
}

/// Symmetric 2×2 output quadrature noise matrix at analysis frequency ω.
pub(crate) fn noise_matrix(sigma: f64, detuning: f64, omega: f64) -> [[f64; 2]; 2] {
    let iw = Complex64::new(0.0, omega);
    let p = Complex64::new(-1.0 - sigma, 0.0) + iw;
    let s = Complex64::new(-1.0 + sigma, 0.0) + iw;
    let q = Complex64::new(detuning, 0.0);
    let r = -q;
    let det = p * s - q * r;
    let one = Complex64::new(1.0, 0.0);
    let g = [
        [-2.0 * s / det - one, 2.0 * q / det],
        [2.0 * r / det, -2.0 * p / det - one],
    ];
    let mut m = [[0.0; 2]; 2];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            *out = (g[i][0] * g[j][0].conj() + g[i][1] * g[j][1].conj()).re;
        }
    }
    m
}

/// Extreme eigenvalues of the noise matrix and the angle of the minimum.
fn extremes(m: [[f64; 2]; 2]) -> (f64, f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let radius = half_diff.hypot(m[0][1]);
    let phi = m[0][1].atan2(half_diff);
    let theta_min = (0.5 * phi + 0.5 * PI).rem_euclid(PI);
    (mean - radius, mean + radius, theta_min)
}

/// Vacuum-normalized noise of the output quadrature at angle `theta` and
/// analysis frequency `omega` (units of κ), after detection efficiency `eta`.
pub fn opo_quadrature_spectrum(
    sigma: f64,
    detuning: NormalizedDetuning,
    omega: f64,
    theta: f64,
    eta: f64,
) -> Result<f64> {
    check_operating_point(sigma, detuning, eta)?;
    if !(omega.is_finite() && theta.is_finite()) {
        return Err(Error::invalid("analysis frequency and angle must be finite"));
    }
    let m = noise_matrix(sigma, detuning.0, omega);
    let (c, s) = (theta.cos(), theta.sin());
    let noise = c * c * m[0][0] + 2.0 * c * s * m[0][1] + s * s * m[1][1];
    Ok(eta * noise + (1.0 - eta))
}

/// Smallest and largest quadrature noise over θ at one frequency.
pub fn spectrum_extremes(
    sigma: f64,
    detuning: NormalizedDetuning,
    omega: f64,
    eta: f64,
) -> Result<(f64, f64)> {
    check_operating_point(sigma, detuning, eta)?;
    let (lo, hi, _) = extremes(noise_matrix(sigma, detuning.0, omega));
    Ok((eta * lo + 1.0 - eta, eta * hi + 1.0 - eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalLevels {
    pub best_squeezing_db: f64,
    pub best_antisqueezing_db: f64,
    pub squeezing_omega: f64,
    pub squeezing_theta: f64,
    pub antisqueezing_omega: f64,
}

pub const OMEGA_GRID_MAX: f64 = 20.0;
pub const OMEGA_GRID_STEP: f64 = 0.05;

/// Best squeezing and anti-squeezing over analysis frequency and quadrature
/// angle. θ is optimized exactly per frequency (eigenvalues of the 2×2 noise
/// matrix); ω is scanned on a grid and refined by golden-section search.
pub fn opo_optimal_levels(
    sigma: f64,
    detuning: NormalizedDetuning,
    eta: f64,
) -> Result<OptimalLevels> {
    check_operating_point(sigma, detuning, eta)?;
    let lowest = |w: f64| extremes(noise_matrix(sigma, detuning.0, w)).0;
    let highest = |w: f64| -extremes(noise_matrix(sigma, detuning.0, w)).1;

    let steps = (OMEGA_GRID_MAX / OMEGA_GRID_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * OMEGA_GRID_STEP).collect();
    let w_min = refine_on_grid(&grid, lowest);
    let w_max = refine_on_grid(&grid, highest);

    let m = noise_matrix(sigma, detuning.0, w_min);
    let (lo, _, theta) = extremes(m);
    let hi = -highest(w_max);
    let to_db = |v: f64| 10.0 * (eta * v + 1.0 - eta).log10();
    Ok(OptimalLevels {
        best_squeezing_db: to_db(lo),
        best_antisqueezing_db: to_db(hi),
        squeezing_omega: w_min,
        squeezing_theta: theta,
        antisqueezing_omega: w_max,
    })
}

fn refine_on_grid(grid: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let values: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let w = golden_section(&f, lo, hi, 1e-10);
    if f(w) <= values[best] {
        w
    } else {
        grid[best]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(d: f64) -> NormalizedDetuning {
        NormalizedDetuning(d)
    }

    fn squeezer() -> SqueezerCavity {
        SqueezerCavity::new(
            15.0,
            0.77,
            0.99,
            crate::material::TELECOM_MODE.into(),
            Arc::new(MaterialModel::lithium_niobate_waveguide()),
        )
        .unwrap()
    }

    #[test]
    fn vacuum_without_pump() {
        for (d, w, th) in [(0.0, 0.0, 0.0), (1.5, 0.7, 1.1), (-2.0, 5.0, 2.9)] {
            let v = opo_quadrature_spectrum(0.0, det(d), w, th, 1.0).unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn resonant_closed_form() {
        for sigma in [0.1, 0.28, 0.6, 0.95] {
            for w in [0.0, 0.3, 1.0, 4.0] {
                let v = opo_quadrature_spectrum(sigma, det(0.0), w, 0.0, 1.0).unwrap();
                let expect = 1.0 - 4.0 * sigma / ((1.0 + sigma).powi(2) + w * w);
                assert!((v - expect).abs() < 1e-13);
                let anti = opo_quadrature_spectrum(sigma, det(0.0), w, PI / 2.0, 1.0).unwrap();
                let expect = 1.0 + 4.0 * sigma / ((1.0 - sigma).powi(2) + w * w);
                assert!((anti - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn minus_five_db_pump_parameter() {
        let sigma = sigma_for_squeezing_db(-5.0).unwrap();
        assert!((sigma - 0.280_13).abs() < 1e-5);
        let v = opo_quadrature_spectrum(sigma, det(0.0), 0.0, 0.0, 1.0).unwrap();
        assert!((v - 10f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn detection_efficiency_mixes_vacuum() {
        let s = opo_quadrature_spectrum(0.5, det(0.4), 0.3, 0.2, 1.0).unwrap();
        let s_eta = opo_quadrature_spectrum(0.5, det(0.4), 0.3, 0.2, 0.7).unwrap();
        assert!((s_eta - (0.7 * s + 0.3)).abs() < 1e-14);
    }

    #[test]
    fn rejects_above_threshold() {
        assert!(opo_quadrature_spectrum(1.0, det(0.0), 0.0, 0.0, 1.0).is_err());
        assert!(opo_quadrature_spectrum(1.5, det(1.0), 0.0, 0.0, 1.0).is_err());
        assert!(opo_quadrature_spectrum(1.3, det(1.0), 0.0, 0.0, 1.0).is_ok());
        assert!(opo_optimal_levels(2.0, det(1.5), 1.0).is_err());
        assert!(opo_quadrature_spectrum(0.5, det(0.0), 0.0, 0.0, 1.2).is_err());
    }

    #[test]
    fn optimal_levels_at_resonance() {
        let sigma = 0.4;
        let lv = opo_optimal_levels(sigma, det(0.0), 1.0).unwrap();
        let expect = 10.0 * (1.0 - 4.0 * sigma / (1.0 + sigma).powi(2)).log10();
        assert!((lv.best_squeezing_db - expect).abs() < 1e-9);
        assert!(lv.squeezing_omega < 1e-6);
        assert!(lv.best_antisqueezing_db >= -lv.best_squeezing_db - 1e-9);
    }

    #[test]
    fn angle_of_minimum_agrees_with_direct_evaluation() {
        let sigma = 0.5;
        let lv = opo_optimal_levels(sigma, det(1.2), 1.0).unwrap();
        let direct = opo_quadrature_spectrum(
            sigma,
            det(1.2),
            lv.squeezing_omega,
            lv.squeezing_theta,
            1.0,
        )
        .unwrap();
        assert!((10.0 * direct.log10() - lv.best_squeezing_db).abs() < 1e-9);
    }

    #[test]
    fn detuning_from_index_shift() {
        let c = squeezer();
        assert_eq!(delta_n_to_detuning(&c, 0.0, 1550.0).unwrap().0, 0.0);
        let one = delta_n_to_detuning(&c, 2.6e-5, 1550.0).unwrap().0;
        let two = delta_n_to_detuning(&c, 5.2e-5, 1550.0).unwrap().0;
        assert!((two - 2.0 * one).abs() < 1e-9 * one);
        // hand evaluation: 4πL|Δn| / (λ(1 − √(r1 r2)))
        let expect = 4.0 * PI * 15e-3 * 2.6e-5 / (1550e-9 * (1.0 - (0.77f64 * 0.99).sqrt()));
        assert!((one - expect).abs() < 1e-9 * expect);
        assert!((one - 24.9).abs() < 0.1, "{one}");
        assert!(delta_n_to_detuning(&c, 0.02, 1550.0).is_err());
    }
}
