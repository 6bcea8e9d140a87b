//! Seeded noise for synthetic datasets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{SweepData, Trace};
use crate::error::{Error, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(sd: f64) -> Result<Normal<f64>> {
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    Normal::new(0.0, 1.0).map_err(|e| Error::invalid(e.to_string()))
}

/// v·(1 + ε), ε ~ N(0, `relative`²).
pub fn multiplicative_noise(values: &[f64], relative: f64, seed: u64) -> Result<Vec<f64>> {
    let dist = normal(relative)?;
    let mut rng = rng(seed);
    Ok(values
        .iter()
        .map(|v| v * (1.0 + relative * dist.sample(&mut rng)))
        .collect())
}

/// v + ε, ε ~ N(0, `sd`²).
pub fn additive_noise(values: &[f64], sd: f64, seed: u64) -> Result<Vec<f64>> {
    let dist = normal(sd)?;
    let mut rng = rng(seed);
    Ok(values
        .iter()
        .map(|v| v + sd * dist.sample(&mut rng))
        .collect())
}

/// Sweep with multiplicative noise on the values; labels are kept.
pub fn noisy_sweep(sweep: &SweepData, relative: f64, seed: u64) -> Result<SweepData> {
    let value = multiplicative_noise(sweep.value(), relative, seed)?;
    Ok(SweepData::new(sweep.abscissa().to_vec(), value)?
        .with_labels(sweep.abscissa_label(), sweep.value_label()))
}

/// Trace with multiplicative noise on the values; mask and label are kept.
pub fn noisy_trace(trace: &Trace, relative: f64, seed: u64) -> Result<Trace> {
    let value = multiplicative_noise(trace.value(), relative, seed)?;
    Ok(Trace::new(trace.time().to_vec(), value)?
        .with_mask(trace.masked().to_vec())?
        .with_label(trace.value_label()))
}
