//! Bounded Levenberg-Marquardt least squares and the fitting pipelines built
//! on it.

mod fpi;
mod reflectivity;

pub use fpi::{count_half_periods, fit_fpi_trace, FpiFit, FpiFitOptions};
pub use reflectivity::{
    fit_delta_n_from_reflectivity, BranchInverter, DeltaNFit, Inversion, ReflectivitySweep,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INITIAL_DAMPING: f64 = 1e-6;
const MAX_DAMPING: f64 = 1e16;
const MIN_DAMPING: f64 = 1e-16;
const FD_RELATIVE_STEP: f64 = 1e-6;
const FD_ABSOLUTE_STEP: f64 = 1e-12;

/// A fitted quantity with its starting value and box constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, initial: f64) -> Self {
        Parameter {
            name: name.into(),
            initial,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub fn bounded(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

/// Observations plus a model returning one prediction per observation.
pub struct FitProblem<F> {
    model: F,
    parameters: Vec<Parameter>,
    observations: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

impl<F> FitProblem<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    pub fn new(model: F, parameters: Vec<Parameter>, observations: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::invalid("no data to fit"));
        }
        if parameters.is_empty() {
            return Err(Error::invalid("no parameters to fit"));
        }
        if observations.len() < parameters.len() {
            return Err(Error::invalid(format!(
                "{} data points cannot constrain {} parameters",
                observations.len(),
                parameters.len()
            )));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite observation"));
        }
        for p in &parameters {
            if !(p.lower <= p.upper) || p.lower.is_nan() || p.upper.is_nan() {
                return Err(Error::invalid(format!("empty bounds for `{}`", p.name)));
            }
            if !(p.initial.is_finite() && p.initial >= p.lower && p.initial <= p.upper) {
                return Err(Error::invalid(format!(
                    "initial value of `{}` = {} outside [{}, {}]",
                    p.name, p.initial, p.lower, p.upper
                )));
            }
        }
        Ok(FitProblem {
            model,
            parameters,
            observations,
            sigma: None,
        })
    }

    /// Per-point standard deviations; residuals are divided by them.
    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.observations.len() {
            return Err(Error::invalid("sigma length differs from the data"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("sigma values must be positive"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    fn residuals(&self, p: &[f64]) -> Result<DVector<f64>> {
        let pred = (self.model)(p)?;
        if pred.len() != self.observations.len() {
            return Err(Error::Numerical(format!(
                "model returned {} predictions for {} observations",
                pred.len(),
                self.observations.len()
            )));
        }
        let r = DVector::from_iterator(
            pred.len(),
            pred.iter().zip(&self.observations).enumerate().map(|(i, (y, o))| {
                let w = self.sigma.as_ref().map_or(1.0, |s| s[i]);
                (y - o) / w
            }),
        );
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("model produced a non-finite value".into()));
        }
        Ok(r)
    }

    /// Forward differences; steps backwards when the forward point would
    /// leave the box.
    fn jacobian(&self, p: &[f64], r: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut jac = DMatrix::zeros(r.len(), p.len());
        let mut q = p.to_vec();
        for (j, bounds) in self.parameters.iter().enumerate() {
            let mut h = (FD_RELATIVE_STEP * p[j].abs()).max(FD_ABSOLUTE_STEP);
            if p[j] + h > bounds.upper {
                h = -h;
            }
            q[j] = p[j] + h;
            let rh = self.residuals(&q)?;
            q[j] = p[j];
            let h = (p[j] + h) - p[j];
            jac.set_column(j, &((rh - r) / h));
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative parameter change below which the fit stops.
    pub step: f64,
    /// Largest cosine between the residual and a Jacobian column.
    pub gradient: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            step: 1e-10,
            gradient: 1e-10,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    /// Gauss-Newton covariance (JᵀJ)⁻¹ at the solution, scaled by the
    /// reduced chi-square when no per-point sigma was given.
    pub covariance: Vec<Vec<f64>>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: String,
    /// Residual norm after each accepted step, starting with the initial guess.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn uncertainties(&self) -> Vec<f64> {
        (0..self.parameters.len())
            .map(|i| self.covariance[i][i].max(0.0).sqrt())
            .collect()
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameter_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.parameters[i])
    }

    pub fn to_json(&self) -> serde_json::Value {
        let sigma = self.uncertainties();
        let params: serde_json::Map<String, serde_json::Value> = self
            .parameter_names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                (
                    n.clone(),
                    serde_json::json!({ "value": self.parameters[i], "uncertainty": sigma[i] }),
                )
            })
            .collect();
        serde_json::json!({
            "parameters": params,
            "covariance": self.covariance,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "reason": self.reason,
            "warnings": self.warnings,
        })
    }
}

/// Minimizes the weighted residual sum of squares inside the parameter box.
///
/// Marquardt scaling of the damping term; the damping factor is divided by
/// 10 after an accepted step and multiplied by 10 after a rejected one.
/// Returns the best point found; `converged` is false when the iteration
/// limit or the damping limit stopped the search.
pub fn least_squares<F>(problem: &FitProblem<F>, tolerances: &Tolerances) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = problem.parameters.len();
    let m = problem.observations.len();
    let mut p: Vec<f64> = problem.parameters.iter().map(|q| q.initial).collect();
    let mut r = problem.residuals(&p)?;
    let mut cost = r.norm();
    let mut history = vec![cost];
    let mut lambda = INITIAL_DAMPING;
    let mut iterations = 0;
    let mut converged = false;
    let mut reason = String::from("iteration limit reached");

    'outer: while iterations < tolerances.max_iterations {
        if cost == 0.0 {
            converged = true;
            reason = "zero residual".into();
            break;
        }
        let jac = problem.jacobian(&p, &r)?;
        let grad = jac.tr_mul(&r);
        if gradient_small(&jac, &grad, cost, tolerances.gradient) {
            converged = true;
            reason = "gradient tolerance met".into();
            break;
        }
        iterations += 1;
        let normal = jac.tr_mul(&jac);
        let diag_floor = normal.diagonal().max() * 1e-15;
        loop {
            let mut damped = normal.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * normal[(i, i)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    return Err(Error::Numerical(
                        "singular Jacobian at maximal damping".into(),
                    ));
                }
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let trial: Vec<f64> = (0..n)
                .map(|i| {
                    let b = &problem.parameters[i];
                    (p[i] + delta[i]).clamp(b.lower, b.upper)
                })
                .collect();
            let small = (0..n).all(|i| {
                (trial[i] - p[i]).abs() <= tolerances.step * (p[i].abs() + tolerances.step)
            });
            if let Ok(rt) = problem.residuals(&trial) {
                let cost_t = rt.norm();
                if cost_t < cost {
                    p = trial;
                    r = rt;
                    cost = cost_t;
                    history.push(cost);
                    lambda = (lambda / 10.0).max(MIN_DAMPING);
                    if small {
                        converged = true;
                        reason = "step tolerance met".into();
                        break 'outer;
                    }
                    continue 'outer;
                }
            }
            if small {
                converged = true;
                reason = "step tolerance met".into();
                break 'outer;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                reason = "damping limit reached without decrease".into();
                break 'outer;
            }
        }
    }

    let jac = problem.jacobian(&p, &r)?;
    let normal = jac.tr_mul(&jac);
    let mut cov = match normal.clone().try_inverse() {
        Some(inv) => inv,
        None => normal
            .pseudo_inverse(1e-300)
            .map_err(|e| Error::Numerical(e.to_string()))?,
    };
    if problem.sigma.is_none() && m > n {
        cov *= cost * cost / (m - n) as f64;
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(reason.clone());
    }
    Ok(FitResult {
        parameter_names: problem.parameters.iter().map(|q| q.name.clone()).collect(),
        parameters: p,
        covariance: (0..n).map(|i| cov.row(i).iter().copied().collect()).collect(),
        residual_norm: cost,
        iterations,
        converged,
        reason,
        history,
        warnings,
    })
}

fn gradient_small(jac: &DMatrix<f64>, grad: &DVector<f64>, cost: f64, tol: f64) -> bool {
    jac.column_iter().zip(grad.iter()).all(|(col, g)| {
        let norm = col.norm();
        norm == 0.0 || g.abs() / (norm * cost) <= tol
    })
}
