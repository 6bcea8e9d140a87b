//! Index shift against pump power from coupler reflectivity sweeps.

use std::f64::consts::PI;

use serde::Serialize;

use super::{least_squares, FitProblem, FitResult, Parameter, Tolerances};
use crate::coupler::{coupler_reflectivity, CouplerGeometry};
use crate::data::SweepData;
use crate::error::{Error, Result};
use crate::material::PhotorefractionParams;
use crate::numeric::{bisect, golden_section};

const SCAN_POINTS_PER_FRINGE: f64 = 400.0;
/// Fraction of the branch span after which a drop counts as a turn.
const TURN_REGION: f64 = 0.8;
const TURN_DROP: f64 = 0.05;

/// Inverse of the coupler reflectivity on its first monotone interval in
/// |Δβ|, starting from Δβ = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchInverter {
    geometry: CouplerGeometry,
    r0: f64,
    edge_beta: f64,
    edge_r: f64,
}

/// Result of inverting one reflectivity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inversion {
    Inside(f64),
    /// On the far side of R(0); taken as Δβ = 0.
    BelowZero,
    /// Beyond the monotone interval.
    OutOfBranch,
}

impl BranchInverter {
    pub fn new(geometry: CouplerGeometry) -> Result<Self> {
        geometry.validate()?;
        let r = |x: f64| coupler_reflectivity(&geometry, x);
        let r0 = r(0.0);
        let h = PI / geometry.interaction_length_mm / SCAN_POINTS_PER_FRINGE;
        let cap = 2.0 * geometry.coupling_constant + 200.0 * PI / geometry.interaction_length_mm;
        let mut prev = r0;
        let mut dir = 0.0;
        let mut x = h;
        while x < cap {
            let cur = r(x);
            let d = (cur - prev).signum();
            if cur != prev {
                if dir == 0.0 {
                    dir = d;
                } else if d != dir {
                    let edge = golden_section(|t| -dir * r(t), x - 2.0 * h, x, 1e-14);
                    return Ok(BranchInverter {
                        geometry,
                        r0,
                        edge_beta: edge,
                        edge_r: r(edge),
                    });
                }
            }
            prev = cur;
            x += h;
        }
        Err(Error::Numerical(
            "reflectivity has no turning point in the scanned range".into(),
        ))
    }

    pub fn zero_pump_reflectivity(&self) -> f64 {
        self.r0
    }

    /// Upper end of the monotone interval, mm⁻¹.
    pub fn edge(&self) -> (f64, f64) {
        (self.edge_beta, self.edge_r)
    }

    pub fn invert(&self, reflectivity: f64) -> Result<Inversion> {
        if !(0.0..=1.0).contains(&reflectivity) {
            return Err(Error::invalid(format!(
                "reflectivity {reflectivity} is not reachable for any Δβ"
            )));
        }
        let rising = self.edge_r > self.r0;
        let below = if rising {
            reflectivity <= self.r0
        } else {
            reflectivity >= self.r0
        };
        if below {
            return Ok(Inversion::BelowZero);
        }
        let beyond = if rising {
            reflectivity > self.edge_r
        } else {
            reflectivity < self.edge_r
        };
        if beyond {
            return Ok(Inversion::OutOfBranch);
        }
        let g = |x: f64| Ok(coupler_reflectivity(&self.geometry, x) - reflectivity);
        bisect(g, 0.0, self.edge_beta, 1e-15).map(Inversion::Inside)
    }
}

/// One temperature's reflectivity sweep and the coupler it was taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivitySweep {
    pub temperature_c: f64,
    pub geometry: CouplerGeometry,
    pub data: SweepData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaNFit {
    pub temperature_c: f64,
    pub params: PhotorefractionParams,
    /// Pump power against inverted |Δn|, excluded points removed.
    pub points: SweepData,
    /// Indices into the input sweep that were left out.
    pub excluded: Vec<usize>,
    pub result: FitResult,
}

/// Two stages per temperature: invert each reflectivity to |Δn| on the
/// first monotone branch, then fit |Δn| = aP/(b + cP) with b held at
/// `b_mw` (only a/b and c/b are identifiable).
pub fn fit_delta_n_from_reflectivity(
    sweeps: &[ReflectivitySweep],
    b_mw: f64,
    tolerances: &Tolerances,
) -> Result<Vec<DeltaNFit>> {
    if !(b_mw.is_finite() && b_mw > 0.0) {
        return Err(Error::invalid("fixed b must be positive"));
    }
    sweeps
        .iter()
        .map(|s| fit_one(s, b_mw, tolerances))
        .collect()
}

fn fit_one(sweep: &ReflectivitySweep, b_mw: f64, tolerances: &Tolerances) -> Result<DeltaNFit> {
    if sweep.data.len() < 4 {
        return Err(Error::invalid(format!(
            "sweep at {} °C has {} points, at least 4 needed",
            sweep.temperature_c,
            sweep.data.len()
        )));
    }
    let inverter = BranchInverter::new(sweep.geometry)?;
    let wavelength_mm = sweep.geometry.design_wavelength_nm * 1e-6;
    let mut powers = Vec::new();
    let mut dn = Vec::new();
    let mut sigma = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    // Δn grows with P, so once R has turned back near the edge the rest of
    // the sweep sits on a later branch even if single values look invertible.
    let span = inverter.edge_r - inverter.r0;
    let mut peak = 0.0f64;
    let mut turned = false;
    for (i, (p, r)) in sweep.data.points().enumerate() {
        let progress = (r - inverter.r0) / span;
        if peak > TURN_REGION && progress < peak - TURN_DROP {
            turned = true;
        }
        peak = peak.max(progress);
        let inversion = if turned {
            Inversion::OutOfBranch
        } else {
            inverter.invert(r)?
        };
        let beta = match inversion {
            Inversion::Inside(b) => b,
            Inversion::BelowZero => 0.0,
            Inversion::OutOfBranch => {
                excluded.push(i);
                warnings.push(format!(
                    "point {i} (P = {p} mW, R = {r}) lies beyond the first monotone branch; excluded"
                ));
                continue;
            }
        };
        powers.push(p);
        dn.push(beta * wavelength_mm / (2.0 * PI));
        if let Some(s) = sweep.data.sigma() {
            sigma.push(propagate_sigma(&sweep.geometry, beta, s[i], wavelength_mm));
        }
    }
    if powers.len() < 2 {
        return Err(Error::invalid(format!(
            "fewer than 2 usable points at {} °C",
            sweep.temperature_c
        )));
    }

    let slope_guess = {
        let sxy: f64 = powers.iter().zip(&dn).map(|(p, d)| p * d).sum();
        let sxx: f64 = powers.iter().map(|p| p * p).sum();
        if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 }
    };
    let model = {
        let powers = powers.clone();
        move |q: &[f64]| Ok(powers.iter().map(|p| q[0] * p / (b_mw + q[1] * p)).collect())
    };
    let mut problem = FitProblem::new(
        model,
        vec![
            Parameter::new("a", slope_guess * b_mw).bounded(0.0, f64::INFINITY),
            Parameter::new("c", 0.0).bounded(0.0, f64::INFINITY),
        ],
        dn.clone(),
    )?;
    if sweep.data.sigma().is_some() {
        problem = problem.with_sigma(sigma)?;
    }
    let mut result = least_squares(&problem, tolerances)?;
    result.warnings.extend(warnings);
    let (a, c) = (result.parameters[0], result.parameters[1]);
    let params = PhotorefractionParams::new(sweep.temperature_c, a, b_mw, c)?;
    let points = SweepData::new(powers, dn)?.with_labels("pump_power_mW", "abs_delta_n");
    Ok(DeltaNFit {
        temperature_c: sweep.temperature_c,
        params,
        points,
        excluded,
        result,
    })
}

/// σ_Δn = σ_R / |dR/dΔn|, floored so flat regions do not dominate.
fn propagate_sigma(geometry: &CouplerGeometry, beta: f64, sigma_r: f64, wavelength_mm: f64) -> f64 {
    let h = 1e-7;
    let slope = (coupler_reflectivity(geometry, beta + h) - coupler_reflectivity(geometry, beta))
        / h
        * 2.0
        * PI
        / wavelength_mm;
    (sigma_r / slope.abs().max(1e-300)).min(1e-3)
}
