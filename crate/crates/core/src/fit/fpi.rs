//! Total index excursion and build-up time from a probe transmission trace
//! through the parasitic facet cavity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{least_squares, FitProblem, FitResult, Parameter, Tolerances};
use crate::cavity::{airy, FpiCavity};
use crate::data::Trace;
use crate::error::{Error, Result};

/// Largest |Δn| the fit will consider.
const MAX_DELTA_N: f64 = 1e-2;
/// Minimum samples per transmission oscillation for a trustworthy fit.
const MIN_SAMPLES_PER_OSCILLATION: f64 = 8.0;
const HYSTERESIS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpiFitOptions {
    pub probe_wavelength_nm: f64,
    pub temperature_c: f64,
    /// Time at which the pump was switched on; Δn = 0 before it.
    pub pump_on_s: f64,
    pub tolerances: Tolerances,
}

impl FpiFitOptions {
    pub fn new(probe_wavelength_nm: f64, temperature_c: f64) -> Self {
        FpiFitOptions {
            probe_wavelength_nm,
            temperature_c,
            pump_on_s: 0.0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpiFit {
    /// Steady index excursion (≤ 0).
    pub delta_n_total: f64,
    pub tau_build_s: f64,
    /// Cavity phase before the pump, in [0, π).
    pub phase_offset_rad: f64,
    /// Extrema counted in the unmasked samples.
    pub half_periods: usize,
    pub oscillation_detected: bool,
    pub result: FitResult,
}

/// Number of alternating extrema in `values`, ignoring reversals smaller
/// than a quarter of the full range.
pub fn count_half_periods(values: &[f64]) -> usize {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let threshold = HYSTERESIS * (hi - lo);
    if !(threshold > 0.0) {
        return 0;
    }
    let mut count = 0;
    let mut dir = 0i8;
    let (mut run_lo, mut run_hi) = (values[0], values[0]);
    let mut extreme = values[0];
    for &v in values {
        match dir {
            0 => {
                run_lo = run_lo.min(v);
                run_hi = run_hi.max(v);
                if v - run_lo > threshold {
                    dir = 1;
                    extreme = v;
                } else if run_hi - v > threshold {
                    dir = -1;
                    extreme = v;
                }
            }
            1 => {
                if v > extreme {
                    extreme = v;
                } else if extreme - v > threshold {
                    count += 1;
                    dir = -1;
                    extreme = v;
                }
            }
            _ => {
                if v < extreme {
                    extreme = v;
                } else if v - extreme > threshold {
                    count += 1;
                    dir = 1;
                    extreme = v;
                }
            }
        }
    }
    count
}

struct TraceModel {
    time: Vec<f64>,
    coefficient: f64,
    /// 2πL/λ, rad per unit index.
    phase_per_index: f64,
    pump_on_s: f64,
}

impl TraceModel {
    fn eval(&self, q: &[f64]) -> Vec<f64> {
        let (dn, tau, phi0) = (q[0], q[1], q[2]);
        let reference = airy(self.coefficient, phi0);
        self.time
            .iter()
            .map(|&t| {
                let x = if t > self.pump_on_s {
                    dn * -(-(t - self.pump_on_s) / tau).exp_m1()
                } else {
                    0.0
                };
                airy(self.coefficient, phi0 + self.phase_per_index * x) / reference
            })
            .collect()
    }
}

fn sum_sq(model: &[f64], data: &[f64]) -> f64 {
    model.iter().zip(data).map(|(m, d)| (m - d) * (m - d)).sum()
}

/// Fits Δn(t) = Δn_total·(1 − e^(−(t − t_on)/τ)) seen through the Airy
/// transmission, normalized to its pre-pump value. Masked samples are
/// skipped. The sign ambiguity of the Airy function is removed by taking
/// Δn_total ≤ 0 and the initial phase in [0, π).
pub fn fit_fpi_trace(trace: &Trace, cavity: &FpiCavity, options: &FpiFitOptions) -> Result<FpiFit> {
    let lambda = options.probe_wavelength_nm;
    let coefficient = cavity.finesse(lambda).coefficient;
    if cavity.angled_facets || coefficient == 0.0 {
        return Err(Error::invalid("cavity without facet feedback has no fringes to fit"));
    }
    cavity.effective_index(lambda, options.temperature_c)?;
    let (time, value): (Vec<f64>, Vec<f64>) = trace.samples().unzip();
    if time.len() < 4 {
        return Err(Error::invalid("fewer than 4 unmasked samples"));
    }
    let length_nm = cavity.length_mm * 1e6;
    let quantum = lambda / (4.0 * length_nm);
    let half_periods = count_half_periods(&value);

    let model = TraceModel {
        time: time.clone(),
        coefficient,
        phase_per_index: 2.0 * PI * length_nm / lambda,
        pump_on_s: options.pump_on_s,
    };
    let duration = time[time.len() - 1] - options.pump_on_s;
    if !(duration > 0.0) {
        return Err(Error::invalid("trace ends before the pump is switched on"));
    }
    let dt = median_spacing(&time);

    // coarse grid around the counted excursion
    let mut best = (f64::INFINITY, [0.0; 3]);
    let n_half = half_periods as f64;
    let dn_grid: Vec<f64> = (0..=16)
        .map(|i| -(n_half - 2.0 + 0.25 * i as f64).max(0.05) * quantum)
        .collect();
    let tau_lo = (3.0 * dt).max(duration * 1e-3);
    let tau_hi = duration;
    let tau_grid: Vec<f64> = (0..16)
        .map(|i| tau_lo * (tau_hi / tau_lo).powf(i as f64 / 15.0))
        .collect();
    for &dn in &dn_grid {
        for &tau in &tau_grid {
            for k in 0..24 {
                let phi0 = PI * k as f64 / 24.0;
                let q = [dn, tau, phi0];
                let s = sum_sq(&model.eval(&q), &value);
                if s < best.0 {
                    best = (s, q);
                }
            }
        }
    }
    let [dn0, tau0, phi00] = best.1;
    let problem = FitProblem::new(
        |q: &[f64]| Ok(model.eval(q)),
        vec![
            Parameter::new("delta_n_total", dn0).bounded(-MAX_DELTA_N, 0.0),
            Parameter::new("tau_build_s", tau0).bounded(dt * 1e-3, 1e3 * duration),
            Parameter::new("phase_offset_rad", phi00).bounded(-PI, 2.0 * PI),
        ],
        value,
    )?;
    let mut result = least_squares(&problem, &options.tolerances)?;
    let phase = result.parameters[2].rem_euclid(PI);
    result.parameters[2] = phase;
    let (dn, tau) = (result.parameters[0], result.parameters[1]);

    let max_rate = model.phase_per_index * dn.abs() / tau;
    if max_rate > 0.0 && PI / (max_rate * dt) < MIN_SAMPLES_PER_OSCILLATION {
        result.warnings.push(format!(
            "only {:.1} samples per oscillation at the pump edge",
            PI / (max_rate * dt)
        ));
    }
    let oscillation_detected = dn.abs() >= lambda / (8.0 * length_nm);
    if !oscillation_detected {
        result.converged = false;
        result.reason = format!(
            "no oscillation detected: |Δn_total| below {:.3e}",
            lambda / (8.0 * length_nm)
        );
        result.warnings.push(result.reason.clone());
    }
    Ok(FpiFit {
        delta_n_total: dn,
        tau_build_s: tau,
        phase_offset_rad: phase,
        half_periods,
        oscillation_detected,
        result,
    })
}

fn median_spacing(time: &[f64]) -> f64 {
    let mut d: Vec<f64> = time.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::cavity::simulate_fpi_trace;
    use crate::material::{MaterialModel, PhotorefractionParams, PumpSchedule, PumpSegment};

    fn cavity() -> FpiCavity {
        FpiCavity::new(
            15.0,
            0.14,
            0.13,
            Arc::new(MaterialModel::lithium_niobate_waveguide()),
        )
        .unwrap()
    }

    fn synthetic(a: f64, tau: f64) -> Trace {
        // steady Δn = −a·P/(1 + 0·P) with P = 1 mW
        let params = PhotorefractionParams::new(30.0, a, 1.0, 0.0)
            .unwrap()
            .with_time_constants(tau, 1e4, 10.0)
            .unwrap();
        let schedule = PumpSchedule::new(vec![PumpSegment::pump(0.0, 60.0, 1.0)]).unwrap();
        simulate_fpi_trace(&cavity(), &params, &schedule, 1550.0, 30.0, 0.05).unwrap()
    }

    #[test]
    fn counts_extrema_of_a_sine() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.01).sin()).collect();
        // 10 rad covers extrema at π/2, 3π/2, 5π/2
        assert_eq!(count_half_periods(&v), 3);
        assert_eq!(count_half_periods(&[1.0; 10]), 0);
    }

    #[test]
    fn noiseless_self_inversion() {
        let trace = synthetic(8e-5, 5.0);
        let fit = fit_fpi_trace(&trace, &cavity(), &FpiFitOptions::new(1550.0, 30.0)).unwrap();
        assert!(fit.result.converged, "{}", fit.result.reason);
        assert!((fit.delta_n_total / -8e-5 - 1.0).abs() < 1e-4, "{}", fit.delta_n_total);
        assert!((fit.tau_build_s / 5.0 - 1.0).abs() < 1e-4, "{}", fit.tau_build_s);
        assert!(fit.oscillation_detected);
        let q = 1550.0 / (4.0 * 15.0e6);
        assert!((fit.half_periods as f64 * q - 8e-5).abs() <= q);
    }

    #[test]
    fn masked_interval_is_ignored() {
        let mut trace = synthetic(8e-5, 5.0);
        // corrupt then mask a window
        let (t, mut v) = (trace.time().to_vec(), trace.value().to_vec());
        for (ti, vi) in t.iter().zip(v.iter_mut()) {
            if (25.0..=35.0).contains(ti) {
                *vi = 0.0;
            }
        }
        trace = Trace::new(t, v).unwrap();
        trace.mask_interval(25.0, 35.0);
        let fit = fit_fpi_trace(&trace, &cavity(), &FpiFitOptions::new(1550.0, 30.0)).unwrap();
        assert!((fit.delta_n_total / -8e-5 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn small_excursion_is_flagged() {
        let trace = synthetic(5e-6, 5.0);
        let fit = fit_fpi_trace(&trace, &cavity(), &FpiFitOptions::new(1550.0, 30.0)).unwrap();
        assert!(!fit.oscillation_detected);
        assert!(!fit.result.converged);
        assert!(fit.delta_n_total.abs() < 1550.0 / (8.0 * 15.0e6));
    }

    #[test]
    fn angled_facets_rejected() {
        let trace = synthetic(8e-5, 5.0);
        let c = cavity().angled();
        assert!(fit_fpi_trace(&trace, &c, &FpiFitOptions::new(1550.0, 30.0)).is_err());
    }
}
