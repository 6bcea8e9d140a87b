//! One function per subcommand. Each reads the validated configuration and
//! fills an [`Outputs`] buffer.

use std::sync::Arc;

use lnpr_core::cavity::{
    delta_n_to_detuning, opo_optimal_levels, sigma_for_squeezing_db, simulate_fpi_trace,
    spectrum_extremes, NormalizedDetuning,
};
use lnpr_core::coupler::{
    coupler_reflectivity, homodyne_noise, measured_squeezing_vs_residual_pump,
    reflectivity_vs_pump, squeezing_parameter_from_db, variance_to_db, HomodyneConfig,
};
use lnpr_core::data::{ingest_csv, DataKind, SweepData};
use lnpr_core::fit::{
    fit_delta_n_from_reflectivity, fit_fpi_trace, FpiFitOptions, ReflectivitySweep, Tolerances,
};
use lnpr_core::material::MaterialModel;
use lnpr_core::spdc::{
    degeneracy_power, effective_squeezing_vs_power, phase_matched_signals, qpm_mismatch,
    spdc_spectrum, SpdcOperatingPoint,
};
use lnpr_core::synthetic::{noisy_sweep, noisy_trace};
use lnpr_core::{Error, Result};
use serde_json::json;

use crate::{resolve, tag, Context, Outputs, Subcommand};

pub(crate) fn run(command: Subcommand, ctx: &Context) -> Result<Outputs> {
    let mut out = Outputs::default();
    match command {
        Subcommand::FpiTrace => fpi_trace(ctx, &mut out)?,
        Subcommand::FpiChar => fpi_char(ctx, &mut out)?,
        Subcommand::CouplerSweep => coupler_sweep(ctx, &mut out)?,
        Subcommand::Homodyne => homodyne(ctx, &mut out)?,
        Subcommand::OpoSpectrum => opo_spectrum(ctx, &mut out)?,
        Subcommand::SpdcSpectrum => spdc(ctx, &mut out)?,
        Subcommand::SqueezeBudget => squeeze_budget(ctx, &mut out)?,
        Subcommand::FitDn => fit_dn(ctx, &mut out)?,
        Subcommand::FitFpi => fit_fpi(ctx, &mut out)?,
    }
    Ok(out)
}

fn material(ctx: &Context) -> Result<Arc<MaterialModel>> {
    Ok(Arc::new(ctx.config.material_model()?))
}

fn sweep(abscissa: Vec<f64>, value: Vec<f64>, x: &str, y: &str) -> Result<SweepData> {
    Ok(SweepData::new(abscissa, value)?.with_labels(x, y))
}

fn fpi_trace(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.fpi_trace;
    let cavity = ctx.config.fpi_cavity(material(ctx)?)?;
    let table = ctx.config.photorefraction_table()?;
    let schedule = ctx.config.schedule()?;
    let quantum = cavity.half_period_delta_n(run.probe_wavelength_nm);
    let mut rows = Vec::new();
    for &t in &run.temperatures_c {
        let params = table.at(t)?;
        let trace = simulate_fpi_trace(
            &cavity,
            params,
            &schedule,
            run.probe_wavelength_nm,
            t,
            run.sample_period_s,
        )?;
        let final_dn = params.delta_n_temporal(&schedule, schedule.horizon_s());
        out.file(format!("fpi_trace_{}C.csv", tag(t)), trace.to_csv(&ctx.provenance));
        rows.push(json!({
            "temperature_c": t,
            "samples": trace.len(),
            "final_delta_n": final_dn,
            "half_oscillations": final_dn.abs() / quantum,
        }));
    }
    let summary = json!({
        "probe_wavelength_nm": run.probe_wavelength_nm,
        "half_period_delta_n": quantum,
        "traces": rows,
    });
    out.json("fpi_trace.json", &summary);
    out.summary("half_period_delta_n", json!(quantum));
    Ok(())
}

fn fpi_char(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.fpi_char;
    let cavity = ctx.config.fpi_cavity(material(ctx)?)?;
    let mut rows = Vec::new();
    for &lambda in &run.wavelengths_nm {
        let c = cavity.characteristics(lambda, run.temperature_c)?;
        rows.push(json!({
            "wavelength_nm": lambda,
            "effective_index": cavity.effective_index(lambda, run.temperature_c)?,
            "facet_reflectivity": cavity.facet_reflectivity(lambda),
            "free_spectral_range_pm": c.free_spectral_range_pm,
            "fwhm_pm": c.fwhm_pm,
            "finesse_coefficient": c.finesse.coefficient,
            "finesse": c.finesse.conventional,
            "half_period_delta_n": cavity.half_period_delta_n(lambda),
        }));
    }
    let value = json!({
        "length_mm": cavity.length_mm,
        "temperature_c": run.temperature_c,
        "angled_facets": cavity.angled_facets,
        "wavelengths": rows,
    });
    out.json("fpi_char.json", &value);
    Ok(())
}

fn coupler_sweep(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.coupler_sweep;
    let table = ctx.config.photorefraction_table()?;
    let powers = run.powers_mw.values();
    let mut rows = Vec::new();
    for &t in &run.temperatures_c {
        let g = ctx.config.coupler_geometry(t)?;
        let params = table.at(t)?;
        let r = reflectivity_vs_pump(&g, params, g.design_wavelength_nm, &powers)?;
        let (lo, hi) = r
            .value()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let name = format!("coupler_sweep_{}C.csv", tag(t));
        out.file(&name, r.to_csv(&ctx.provenance));
        rows.push(json!({
            "temperature_c": t,
            "coupling_constant_per_mm": g.coupling_constant,
            "coupling_length_mm": g.coupling_length_mm(),
            "reflectivity_zero_pump": coupler_reflectivity(&g, 0.0),
            "reflectivity_min": lo,
            "reflectivity_max": hi,
            "file": name,
        }));
    }
    out.json("coupler_sweep.json", &json!({ "sweeps": rows }));
    Ok(())
}

fn homodyne(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.homodyne;
    let phases = run.phase_rad.values();
    for &level in &run.squeezing_db {
        let s = squeezing_parameter_from_db(level);
        let noise = phases
            .iter()
            .map(|&phase| {
                let cfg = HomodyneConfig {
                    reflectivity: run.reflectivity,
                    lo_amplitude_sq: run.lo_amplitude_sq,
                    squeezing_parameter: s,
                    phase,
                };
                cfg.validate()?;
                Ok(variance_to_db(homodyne_noise(&cfg) / run.lo_amplitude_sq))
            })
            .collect::<Result<Vec<_>>>()?;
        let data = sweep(phases.clone(), noise, "phase_rad", "noise_dB")?;
        out.file(
            format!("homodyne_{}dB.csv", tag(level)),
            data.to_csv(&ctx.provenance),
        );
    }
    out.summary("reflectivity", json!(run.reflectivity));
    Ok(())
}

fn opo_spectrum(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.opo_spectrum;
    let eta = run.detection_efficiency;
    let mut detunings: Vec<(f64, Option<f64>)> =
        run.detunings.iter().map(|&d| (d, None)).collect();
    if !run.delta_n.is_empty() {
        let cavity = ctx.config.squeezer_cavity(material(ctx)?)?;
        let lambda = ctx
            .config
            .squeezer
            .as_ref()
            .map(|s| s.wavelength_nm)
            .expect("squeezer_cavity checked the section");
        for &dn in &run.delta_n {
            detunings.push((delta_n_to_detuning(&cavity, dn, lambda)?.value(), Some(dn)));
        }
    }
    let omega = run.omega.values();
    let sweep_grid = run.detuning_sweep.values();
    let mut optimal = Vec::new();
    for &level in &run.squeezing_db {
        let sigma = sigma_for_squeezing_db(level)?;
        for &(d, dn) in &detunings {
            let det = NormalizedDetuning(d);
            let (lo, hi): (Vec<f64>, Vec<f64>) = omega
                .iter()
                .map(|&w| {
                    spectrum_extremes(sigma, det, w, eta)
                        .map(|(l, h)| (variance_to_db(l), variance_to_db(h)))
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            let stem = format!("opo_spectrum_{}dB_detuning{}", tag(level), tag(d));
            out.file(
                format!("{stem}_squeezing.csv"),
                sweep(omega.clone(), lo, "omega_kappa", "squeezing_dB")?.to_csv(&ctx.provenance),
            );
            out.file(
                format!("{stem}_antisqueezing.csv"),
                sweep(omega.clone(), hi, "omega_kappa", "antisqueezing_dB")?
                    .to_csv(&ctx.provenance),
            );
            let best = opo_optimal_levels(sigma, det, eta)?;
            optimal.push(json!({
                "level_db": level,
                "sigma": sigma,
                "detuning": d,
                "delta_n": dn,
                "optimal": best,
            }));
        }
        let (best_sq, best_anti): (Vec<f64>, Vec<f64>) = sweep_grid
            .iter()
            .map(|&d| {
                opo_optimal_levels(sigma, NormalizedDetuning(d), eta)
                    .map(|o| (o.best_squeezing_db, o.best_antisqueezing_db))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        let stem = format!("opo_detuning_sweep_{}dB", tag(level));
        out.file(
            format!("{stem}_squeezing.csv"),
            sweep(sweep_grid.clone(), best_sq, "detuning_kappa", "best_squeezing_dB")?
                .to_csv(&ctx.provenance),
        );
        out.file(
            format!("{stem}_antisqueezing.csv"),
            sweep(sweep_grid.clone(), best_anti, "detuning_kappa", "best_antisqueezing_dB")?
                .to_csv(&ctx.provenance),
        );
    }
    out.json(
        "opo_optimal.json",
        &json!({ "detection_efficiency": eta, "points": optimal }),
    );
    Ok(())
}

fn spdc(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.spdc_spectrum;
    let device = ctx.config.qpm_device(material(ctx)?, run.reference_power_mw)?;
    let table = ctx.config.photorefraction_table()?;
    let grid = run.signal_nm.values();
    let max_power = run.powers_mw.iter().copied().fold(0.0, f64::max);
    let mut points = Vec::new();
    for op in &run.operating_points {
        let params = table.at(op.temperature_c)?;
        let mut per_power = Vec::new();
        for &p in &run.powers_mw {
            let point = SpdcOperatingPoint {
                pump_wavelength_nm: op.pump_wavelength_nm,
                temperature_c: op.temperature_c,
                pump_power_mw: p,
            };
            let spectrum = spdc_spectrum(&device, &point, params, &grid, run.background)?;
            out.file(
                format!("spdc_{}C_{}mW.csv", tag(op.temperature_c), tag(p)),
                spectrum.to_sweep()?.to_csv(&ctx.provenance),
            );
            per_power.push(json!({
                "pump_power_mw": p,
                "delta_k_at_degeneracy_per_mm":
                    qpm_mismatch(&device, &point, 2.0 * op.pump_wavelength_nm, params)?,
                "phase_matched_signals_nm": phase_matched_signals(&device, &point, params, &grid)?,
            }));
        }
        points.push(json!({
            "temperature_c": op.temperature_c,
            "pump_wavelength_nm": op.pump_wavelength_nm,
            "degeneracy_power_mw":
                degeneracy_power(&device, op.temperature_c, op.pump_wavelength_nm, params, max_power)?,
            "powers": per_power,
        }));
    }
    let value = json!({
        "poling_period_um": device.poling_period_um,
        "length_mm": device.length_mm,
        "reference_power_mw": run.reference_power_mw,
        "operating_points": points,
    });
    out.json("spdc_spectrum.json", &value);
    out.summary("poling_period_um", json!(device.poling_period_um));
    Ok(())
}

fn squeeze_budget(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.squeeze_budget;
    let table = ctx.config.photorefraction_table()?;
    let params = table.at(run.temperature_c)?;
    let coupler = ctx.config.balanced_coupler(run.temperature_c)?;
    let residual = run.residual_powers_mw.values();
    let mut homodyne = Vec::new();
    for &level in &run.initial_db {
        let measured = measured_squeezing_vs_residual_pump(
            &coupler,
            params,
            coupler.design_wavelength_nm,
            level,
            &residual,
            run.pump_during_calibration,
        )?;
        let last = *measured.value().last().expect("grid has points");
        out.file(
            format!("squeeze_budget_homodyne_{}dB.csv", tag(level)),
            measured.to_csv(&ctx.provenance),
        );
        homodyne.push(json!({
            "initial_db": level,
            "measured_db_at_max_residual": last,
        }));
    }

    let device = ctx.config.qpm_device(material(ctx)?, run.reference_power_mw)?;
    let curves = effective_squeezing_vs_power(
        &device,
        run.temperature_c,
        run.pump_wavelength_nm,
        params,
        run.mu0,
        &run.pump_powers_mw.values(),
    )?;
    out.file(
        "squeeze_budget_qpm_ideal.csv",
        curves.ideal.to_csv(&ctx.provenance),
    );
    out.file(
        "squeeze_budget_qpm_photorefractive.csv",
        curves.photorefractive.to_csv(&ctx.provenance),
    );
    let value = json!({
        "temperature_c": run.temperature_c,
        "coupler_length_mm": coupler.interaction_length_mm,
        "pump_during_calibration": run.pump_during_calibration,
        "max_residual_power_mw": residual.last(),
        "homodyne": homodyne,
        "qpm": {
            "mu0": run.mu0,
            "poling_period_um": device.poling_period_um,
            "max_pump_power_mw": curves.ideal.abscissa().last(),
            "ideal_db_at_max": curves.ideal.value().last(),
            "photorefractive_db_at_max": curves.photorefractive.value().last(),
        },
    });
    out.json("squeeze_budget.json", &value);
    Ok(())
}

fn fit_dn(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.fit_dn;
    let table = ctx.config.photorefraction_table()?;
    let powers = run.synthetic_powers_mw.values();
    let mut sweeps = Vec::new();
    for (i, entry) in run.sweeps.iter().enumerate() {
        let geometry = ctx.config.coupler_geometry(entry.temperature_c)?;
        let (data, source) = match &entry.path {
            Some(path) => {
                let path = resolve(&ctx.config, path);
                let ingested = ingest_csv(&path, DataKind::Sweep)?;
                for w in &ingested.warnings {
                    out.warn(format!("{}: {w}", path.display()));
                }
                (ingested.into_sweep()?, path.display().to_string())
            }
            None => {
                let clean = reflectivity_vs_pump(
                    &geometry,
                    table.at(entry.temperature_c)?,
                    geometry.design_wavelength_nm,
                    &powers,
                )?;
                let seed = ctx.seed.wrapping_add(i as u64);
                let noisy = noisy_sweep(&clean, run.synthetic_noise, seed)?;
                let clipped = noisy.value().iter().map(|v| v.clamp(0.0, 1.0)).collect();
                let data = sweep(
                    noisy.abscissa().to_vec(),
                    clipped,
                    noisy.abscissa_label(),
                    noisy.value_label(),
                )?;
                (data, format!("synthetic (seed {seed})"))
            }
        };
        out.file(
            format!("fit_dn_input_{}C.csv", tag(entry.temperature_c)),
            data.to_csv(&ctx.provenance),
        );
        sweeps.push((
            ReflectivitySweep {
                temperature_c: entry.temperature_c,
                geometry,
                data,
            },
            source,
        ));
    }
    let inputs: Vec<ReflectivitySweep> = sweeps.iter().map(|(s, _)| s.clone()).collect();
    let fits = fit_delta_n_from_reflectivity(&inputs, run.b_mw, &Tolerances::default())?;
    let mut rows = Vec::new();
    for (fit, (_, source)) in fits.iter().zip(&sweeps) {
        out.file(
            format!("fit_dn_points_{}C.csv", tag(fit.temperature_c)),
            fit.points.to_csv(&ctx.provenance),
        );
        for w in &fit.result.warnings {
            out.warn(format!("{} °C: {w}", fit.temperature_c));
        }
        if !fit.result.converged {
            out.warn(format!(
                "{} °C: fit did not converge ({})",
                fit.temperature_c, fit.result.reason
            ));
        }
        rows.push(json!({
            "temperature_c": fit.temperature_c,
            "source": source,
            "a": fit.params.a,
            "b_mw": fit.params.b,
            "c": fit.params.c,
            "linear_slope_per_mw": fit.params.linear_slope(),
            "delta_n_at_10mw": fit.params.delta_n_steady(10.0),
            "excluded_points": fit.excluded,
            "fit": fit.result.to_json(),
        }));
    }
    let converged = fits.iter().all(|f| f.result.converged);
    out.json("fit_dn.json", &json!({ "converged": converged, "sweeps": rows }));
    out.summary("converged", json!(converged));
    Ok(())
}

fn fit_fpi(ctx: &Context, out: &mut Outputs) -> Result<()> {
    let run = &ctx.config.fit_fpi;
    let cavity = ctx.config.fpi_cavity(material(ctx)?)?;
    let (trace, source) = match &run.path {
        Some(path) => {
            let path = resolve(&ctx.config, path);
            let ingested = ingest_csv(&path, DataKind::Trace)?;
            for w in &ingested.warnings {
                out.warn(format!("{}: {w}", path.display()));
            }
            (ingested.into_trace()?, path.display().to_string())
        }
        None => {
            let table = ctx.config.photorefraction_table()?;
            let clean = simulate_fpi_trace(
                &cavity,
                table.at(run.temperature_c)?,
                &ctx.config.schedule()?,
                run.probe_wavelength_nm,
                run.temperature_c,
                ctx.config.fpi_trace.sample_period_s,
            )?;
            let trace = noisy_trace(&clean, run.synthetic_noise, ctx.seed)?;
            (trace, format!("synthetic (seed {})", ctx.seed))
        }
    };
    if trace.samples().next().is_none() {
        return Err(Error::Invalid("trace has no unmasked samples".into()));
    }
    out.file("fit_fpi_input.csv", trace.to_csv(&ctx.provenance));
    let mut options = FpiFitOptions::new(run.probe_wavelength_nm, run.temperature_c);
    options.pump_on_s = run.pump_on_s;
    let fit = fit_fpi_trace(&trace, &cavity, &options)?;
    for w in &fit.result.warnings {
        out.warn(w.clone());
    }
    let value = json!({
        "source": source,
        "temperature_c": run.temperature_c,
        "probe_wavelength_nm": run.probe_wavelength_nm,
        "delta_n_total": fit.delta_n_total,
        "tau_build_s": fit.tau_build_s,
        "phase_offset_rad": fit.phase_offset_rad,
        "half_periods": fit.half_periods,
        "oscillation_detected": fit.oscillation_detected,
        "converged": fit.result.converged,
        "fit": fit.result.to_json(),
    });
    out.json("fit_fpi.json", &value);
    out.summary("converged", json!(fit.result.converged));
    Ok(())
}

