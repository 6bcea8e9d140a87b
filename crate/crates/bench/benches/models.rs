use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use lnpr_core::{
    least_squares, opo_optimal_levels, sigma_for_squeezing_db, spdc_spectrum, FitProblem,
    MaterialModel, NormalizedDetuning, Parameter, PhotorefractionParams, QpmDevice, QpmWaveguide,
    SpdcOperatingPoint, Tolerances,
};

fn opo(c: &mut Criterion) {
    let sigma = sigma_for_squeezing_db(-10.0).unwrap();
    c.bench_function("opo_optimal_levels", |b| {
        b.iter(|| opo_optimal_levels(black_box(sigma), NormalizedDetuning(1.5), 1.0).unwrap())
    });
}

fn spdc(c: &mut Criterion) {
    let material = Arc::new(MaterialModel::lithium_niobate_waveguide());
    let device = QpmDevice::calibrated(
        15.0,
        QpmWaveguide::default(),
        material,
        30.0,
        770.73,
        1541.46,
        0.0,
    )
    .unwrap();
    let params = PhotorefractionParams::new(30.0, 1.15e-5, 1.0, 0.002).unwrap();
    let point = SpdcOperatingPoint {
        pump_wavelength_nm: 770.73,
        temperature_c: 30.0,
        pump_power_mw: 2.0,
    };
    let grid: Vec<f64> = (0..1401).map(|i| 1480.0 + 0.1 * i as f64).collect();
    c.bench_function("spdc_spectrum_1401", |b| {
        b.iter(|| spdc_spectrum(&device, &point, &params, black_box(&grid), 0.0).unwrap())
    });
}

fn fit(c: &mut Criterion) {
    let x: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
    let y: Vec<f64> = x.iter().map(|t| 2.0 * (-0.7 * t).exp() + 0.1).collect();
    c.bench_function("least_squares_exponential", |b| {
        b.iter(|| {
            let problem = FitProblem::new(
                |p: &[f64]| Ok(x.iter().map(|t| p[0] * (-p[1] * t).exp() + p[2]).collect()),
                vec![
                    Parameter::new("amplitude", 1.0),
                    Parameter::new("rate", 0.3).bounded(0.0, 10.0),
                    Parameter::new("offset", 0.0),
                ],
                y.clone(),
            )
            .unwrap();
            least_squares(&problem, &Tolerances::default()).unwrap()
        })
    });
}

criterion_group!(benches, opo, spdc, fit);
criterion_main!(benches);
