//! Forward models and fitting for photorefractive index shifts in
//! lithium-niobate waveguide circuits: parasitic Fabry-Perot cavities,
//! directional couplers and homodyne detection, quasi-phase-matched
//! down-conversion, and detuned squeezers.

// NaN must fail range checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Version of the model library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod cavity;
pub mod config;
pub mod coupler;
pub mod data;
pub mod error;
pub mod fit;
pub mod material;
mod numeric;
pub mod spdc;
pub mod synthetic;

pub use cavity::{
    delta_n_to_detuning, finesse, opo_optimal_levels, opo_quadrature_spectrum,
    sigma_for_squeezing_db, simulate_fpi_trace, spectrum_extremes, Finesse, FpiCavity,
    FpiCharacteristics, NormalizedDetuning, OptimalLevels, SqueezerCavity,
};
pub use config::{parse_config, Config};
pub use coupler::{
    coupler_reflectivity, coupling_length, homodyne_noise, measured_squeezing_vs_residual_pump,
    reflectivity_vs_pump, CouplerGeometry, HomodyneConfig,
};
pub use data::{ingest_csv, DataKind, Dataset, SweepData, Trace};
pub use error::{Error, Result};
pub use fit::{
    fit_delta_n_from_reflectivity, fit_fpi_trace, least_squares, FitProblem, FitResult,
    Parameter, Tolerances,
};
pub use material::{
    MaterialModel, ModeId, PhotorefractionParams, PhotorefractionTable, PumpSchedule,
    PumpSegment, Sellmeier,
};
pub use spdc::{
    calibrate_poling_period, effective_squeezing_vs_power, qpm_mismatch, spdc_spectrum,
    QpmDevice, QpmWaveguide, SpdcOperatingPoint,
};
