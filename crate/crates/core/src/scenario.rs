//! End-to-end scenario runs.
//!
//! [`execute`] is pure: a resolved configuration and a seed map to a results
//! table, a summary table and a plot. [`run`] adds file handling: it resolves
//! the configuration, writes `results.csv`, `summary.csv`, `plot.svg`, the
//! resolved `config.toml` and `manifest.json` into the output directory.
//! Rerunning with the written `config.toml` and the recorded seed reproduces
//! the tables byte for byte, independent of the number of worker threads.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    fit_conversion_curve, fit_noise_polynomial, predict_visibility, transmittance_ratio, FitResult,
};
use crate::circuit::{scan_phases, CircuitConfig, NOISE_REFERENCE_WINDOW_S};
use crate::config::ConfigDoc;
use crate::converter::ConverterParams;
use crate::detection::SeedStream;
use crate::error::{Error, Result};
use crate::experiment::{
    measure_fringe, observed_transmission, sample_conversion_curve, Acquisition, ConversionCounts,
    FringeSummary,
};
use crate::mode::Band;
use crate::plot::{Plot, Series, Style, BLACK, BLUE, GREEN, RED};
use crate::table::{conversion_counts_from_table, fmt_f64, Table, UNIT_COUNTS, UNIT_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ConversionCurve,
    Fringe,
    VisibilityVsPower,
    NoiseAndNetVisibility,
    VisibilityVsAlpha,
    Fit,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::ConversionCurve,
        ScenarioKind::Fringe,
        ScenarioKind::VisibilityVsPower,
        ScenarioKind::NoiseAndNetVisibility,
        ScenarioKind::VisibilityVsAlpha,
        ScenarioKind::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ConversionCurve => "conversion-curve",
            ScenarioKind::Fringe => "fringe",
            ScenarioKind::VisibilityVsPower => "visibility-vs-power",
            ScenarioKind::NoiseAndNetVisibility => "noise-and-net-visibility",
            ScenarioKind::VisibilityVsAlpha => "visibility-vs-alpha",
            ScenarioKind::Fit => "fit",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!(
                    "unknown scenario `{s}` (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Overrides {
    /// Number of points along the scenario's main sweep.
    pub points: Option<usize>,
    pub duration_s: Option<f64>,
    pub degree: Option<usize>,
}

/// Folds the overrides into the configuration so the written document alone
/// reproduces the run.
pub fn resolve(kind: ScenarioKind, mut doc: ConfigDoc, overrides: Overrides) -> Result<ConfigDoc> {
    if let Some(n) = overrides.points {
        match kind {
            ScenarioKind::ConversionCurve | ScenarioKind::Fit => doc.conversion_points = n,
            ScenarioKind::Fringe => doc.fringe_points = n,
            ScenarioKind::VisibilityVsPower | ScenarioKind::NoiseAndNetVisibility => {
                doc.power_points = n
            }
            ScenarioKind::VisibilityVsAlpha => doc.alpha_points = n,
        }
    }
    if let Some(t) = overrides.duration_s {
        doc.duration_s = t;
    }
    if let Some(d) = overrides.degree {
        doc.noise_degree = d;
    }
    doc.validate()?;
    Ok(doc)
}

#[derive(Debug)]
pub struct ScenarioOutput {
    pub results: Table,
    pub summary: Table,
    pub plot: Plot,
    /// Set when a fit did not converge. The tables are still complete and
    /// are written before the failure is reported.
    pub failure: Option<Error>,
}

struct Summary(Table);

impl Summary {
    fn new() -> Self {
        Self(Table::new(&[
            ("quantity", UNIT_LABEL),
            ("unit", UNIT_LABEL),
            ("value", "mixed"),
            ("sigma", "mixed"),
        ]))
    }

    fn add(&mut self, quantity: &str, unit: &str, value: f64, sigma: f64) {
        self.0.push(vec![
            quantity.into(),
            unit.into(),
            fmt_f64(value),
            fmt_f64(sigma),
        ]);
    }

    fn value(&mut self, quantity: &str, unit: &str, value: f64) {
        self.add(quantity, unit, value, f64::NAN);
    }
}

fn acquisition(doc: &ConfigDoc) -> Acquisition {
    Acquisition {
        duration_s: doc.duration_s,
        bin_width_s: doc.bin_width_s(),
    }
}

/// Background rate implied by the model, counts/s in the reference window.
fn model_noise_cps(cfg: &CircuitConfig, params: &ConverterParams, band: Band) -> f64 {
    params.background_rate(band, cfg.pump_power_mw, cfg.alpha2) + cfg.dark_count_cps
}

/// Visibility predicted from signal rate and background, `NaN` where
/// undefined.
fn expected_visibility(
    cfg: &CircuitConfig,
    params: &ConverterParams,
    band: Band,
    noise_cps: f64,
) -> f64 {
    let d = noise_cps * cfg.window_s / NOISE_REFERENCE_WINDOW_S;
    cfg.overall_transmittance(params, band)
        .and_then(|t| predict_visibility(cfg.alpha2, t, cfg.clock_hz, d))
        .map(|v| v * cfg.intrinsic_visibility)
        .unwrap_or(f64::NAN)
}

/// Measured background converted to counts/s in the reference window.
fn measured_noise_cps(summary: &FringeSummary, cfg: &CircuitConfig, duration_s: f64) -> f64 {
    summary.background_counts / duration_s * NOISE_REFERENCE_WINDOW_S / cfg.window_s
}

fn nan_or<T>(x: Option<T>, f: impl Fn(T) -> f64) -> f64 {
    x.map(f).unwrap_or(f64::NAN)
}

fn band_color(band: Band) -> &'static str {
    match band {
        Band::Visible => RED,
        Band::Telecom => GREEN,
    }
}

/// Runs one scenario on a resolved configuration.
///
/// `input` is only used by [`ScenarioKind::Fit`]; without it the fit runs
/// on a synthetic conversion curve drawn from the configuration.
pub fn execute(
    kind: ScenarioKind,
    doc: &ConfigDoc,
    seed: u64,
    input: Option<&Table>,
) -> Result<ScenarioOutput> {
    doc.validate()?;
    let seeds = SeedStream::new(seed);
    match kind {
        ScenarioKind::ConversionCurve => conversion_curve(doc, seeds),
        ScenarioKind::Fringe => fringe(doc, seeds),
        ScenarioKind::VisibilityVsPower => visibility_vs_power(doc, seeds),
        ScenarioKind::NoiseAndNetVisibility => noise_and_net_visibility(doc, seeds),
        ScenarioKind::VisibilityVsAlpha => visibility_vs_alpha(doc, seeds),
        ScenarioKind::Fit => fit(doc, seeds, input),
    }
}

/// Conversion fit on `(P, T_obs)` plus the derived peak location; a
/// non-converged fit is reported through `failure`.
fn summarize_fit(summary: &mut Summary, fit: &FitResult) -> Option<Error> {
    let (a, eta) = (fit.values[0], fit.values[1]);
    summary.add("saturation", "1", a, fit.sigmas[0]);
    summary.add("coupling_per_mw", "1/mW", eta, fit.sigmas[1]);
    let peak = FRAC_PI_2.powi(2) / eta;
    summary.add(
        "fitted_peak_pump_mw",
        "mW",
        peak,
        peak * fit.sigmas[1] / eta,
    );
    summary.value("fit_rss", "1", fit.rss);
    summary.value("fit_iterations", "1", fit.iterations as f64);
    summary.value("fit_converged", "1", if fit.converged { 1.0 } else { 0.0 });
    (!fit.converged).then_some(Error::FitNotConverged {
        iterations: fit.iterations,
    })
}

fn ratio_lookup(ratios: &[(f64, f64)], pump: f64) -> f64 {
    ratios
        .iter()
        .find(|r| r.0 == pump)
        .map(|r| r.1)
        .unwrap_or(f64::NAN)
}

fn mean_ratio_above(ratios: &[(f64, f64)], pump_mw: f64) -> f64 {
    let sel: Vec<f64> = ratios
        .iter()
        .filter(|r| r.0 > pump_mw)
        .map(|r| r.1)
        .collect();
    if sel.is_empty() {
        f64::NAN
    } else {
        sel.iter().sum::<f64>() / sel.len() as f64
    }
}

fn conversion_curve(doc: &ConfigDoc, seeds: SeedStream) -> Result<ScenarioOutput> {
    let (cfg, params) = (doc.circuit(), doc.converter());
    let pumps = doc.pump_grid(doc.conversion_points);
    let counts = sample_conversion_curve(&cfg, &params, &pumps, doc.duration_s, seeds)?;
    let observed = observed_transmission(&counts);
    let triples: Vec<(f64, f64, f64)> = counts
        .iter()
        .map(|c| (c.pump_mw, c.visible_counts as f64, c.telecom_counts as f64))
        .collect();
    let c0 = counts
        .iter()
        .find(|c| c.pump_mw == 0.0)
        .map(|c| c.visible_counts as f64);
    let ratios = match c0 {
        Some(c0) if c0 > 0.0 => transmittance_ratio(&triples, c0)?,
        _ => Vec::new(),
    };

    let mut results = Table::new(&[
        ("pump_power_mw", "mW"),
        ("transmission", "1"),
        ("conversion", "1"),
        ("visible_rate_cps", "1/s"),
        ("telecom_rate_cps", "1/s"),
        ("visible_counts", UNIT_COUNTS),
        ("telecom_counts", UNIT_COUNTS),
        ("observed_transmission", "1"),
        ("transmittance_ratio", "1"),
    ]);
    for (k, c) in counts.iter().enumerate() {
        let eff = params.efficiency(c.pump_mw)?;
        let t_obs = observed.as_ref().map(|o| o[k].1).unwrap_or(f64::NAN);
        results.push(vec![
            fmt_f64(c.pump_mw),
            fmt_f64(eff.transmission),
            fmt_f64(eff.conversion),
            fmt_f64(c.visible_rate),
            fmt_f64(c.telecom_rate),
            c.visible_counts.to_string(),
            c.telecom_counts.to_string(),
            fmt_f64(t_obs),
            fmt_f64(ratio_lookup(&ratios, c.pump_mw)),
        ]);
    }

    let mut summary = Summary::new();
    summary.value("duration_s", "s", doc.duration_s);
    let peak = counts
        .iter()
        .max_by(|a, b| a.telecom_rate.total_cmp(&b.telecom_rate))
        .map(|c| c.pump_mw)
        .unwrap_or(f64::NAN);
    summary.value("peak_pump_mw_rate", "mW", peak);
    let peak_counts = counts
        .iter()
        .max_by_key(|c| c.telecom_counts)
        .map(|c| c.pump_mw);
    summary.value("peak_pump_mw_counts", "mW", nan_or(peak_counts, |p| p));
    summary.value("peak_pump_mw_model", "mW", params.peak_pump_mw());
    summary.value(
        "mean_transmittance_ratio_above_50mw",
        "1",
        mean_ratio_above(&ratios, 50.0),
    );
    let mut failure = None;
    if let Some(obs) = &observed {
        match fit_conversion_curve(obs, None) {
            Ok(fit) => failure = summarize_fit(&mut summary, &fit),
            Err(e) => log::warn!("conversion fit skipped: {e}"),
        }
    } else {
        log::warn!("no zero-pump counts; transmission and fit not available");
    }

    let plot = conversion_plot(&counts);
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure,
    })
}

fn conversion_plot(counts: &[ConversionCounts]) -> Plot {
    let pts = |f: &dyn Fn(&ConversionCounts) -> f64| {
        counts.iter().map(|c| (c.pump_mw, f(c))).collect::<Vec<_>>()
    };
    Plot::new(
        "Detected counts versus pump power",
        "pump power (mW)",
        "counts",
    )
    .with(Series::new(
        "visible",
        pts(&|c| c.visible_counts as f64),
        Style::Markers,
        RED,
    ))
    .with(Series::new(
        "telecom",
        pts(&|c| c.telecom_counts as f64),
        Style::Markers,
        GREEN,
    ))
}

fn fringe(doc: &ConfigDoc, seeds: SeedStream) -> Result<ScenarioOutput> {
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = acquisition(doc);
    let phases = scan_phases(doc.fringe_points);
    let m = measure_fringe(&cfg, &params, &phases, acq, seeds)?;

    let mut results = Table::new(&[
        ("phase_rad", "rad"),
        ("visible_counts", UNIT_COUNTS),
        ("telecom_counts", UNIT_COUNTS),
        ("visible_background", "counts/window"),
        ("telecom_background", "counts/window"),
        ("visible_expected", "counts/window"),
        ("telecom_expected", "counts/window"),
    ]);
    for o in &m.points {
        results.push(vec![
            fmt_f64(o.phase),
            o.visible.middle_counts.to_string(),
            o.telecom.middle_counts.to_string(),
            fmt_f64(o.visible.background_counts),
            fmt_f64(o.telecom.background_counts),
            fmt_f64(o.rates.visible.middle_total() * acq.duration_s),
            fmt_f64(o.rates.telecom.middle_total() * acq.duration_s),
        ]);
    }

    let mut summary = Summary::new();
    summary.value("pump_power_mw", "mW", cfg.pump_power_mw);
    summary.value("alpha2", "1", cfg.alpha2);
    summary.value("duration_s", "s", acq.duration_s);
    let mut plot = Plot::new("Interference fringes", "phase (rad)", "counts in window");
    for band in Band::ALL {
        let b = band.as_str();
        let s = m.summary(band);
        summary.add(
            &format!("{b}_visibility"),
            "1",
            nan_or(s.grid, |g| g.visibility),
            nan_or(s.grid, |g| g.sigma),
        );
        summary.add(
            &format!("{b}_visibility_fit"),
            "1",
            nan_or(s.fit, |f| f.visibility),
            nan_or(s.fit, |f| f.sigma),
        );
        summary.add(
            &format!("{b}_net_visibility"),
            "1",
            nan_or(s.net, |g| g.visibility),
            nan_or(s.net, |g| g.sigma),
        );
        let noise = model_noise_cps(&cfg, &params, band);
        summary.value(
            &format!("{b}_predicted_visibility"),
            "1",
            expected_visibility(&cfg, &params, band, noise),
        );
        summary.value(
            &format!("{b}_noise_cps"),
            "1/s",
            measured_noise_cps(&s, &cfg, acq.duration_s),
        );
        plot = plot.with(Series::new(
            b,
            m.scan(band),
            Style::Markers,
            band_color(band),
        ));
    }
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure: None,
    })
}

/// Fringe summaries per pump power; pump point `k` uses `seeds.child(k)`.
struct PowerPoint {
    pump_mw: f64,
    transmission: f64,
    bands: [FringeSummary; 2],
}

fn power_sweep(
    doc: &ConfigDoc,
    seeds: SeedStream,
) -> Result<(Vec<PowerPoint>, CircuitConfig, ConverterParams)> {
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = acquisition(doc);
    let phases = scan_phases(doc.fringe_points);
    let pumps = doc.pump_grid(doc.power_points);
    let points = pumps
        .par_iter()
        .enumerate()
        .map(|(k, &pump)| {
            let m = measure_fringe(
                &cfg.with_pump(pump),
                &params,
                &phases,
                acq,
                seeds.child(k as u64),
            )?;
            Ok(PowerPoint {
                pump_mw: pump,
                transmission: params.efficiency(pump)?.transmission,
                bands: [m.summary(Band::Visible), m.summary(Band::Telecom)],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, cfg, params))
}

fn band_index(band: Band) -> usize {
    match band {
        Band::Visible => 0,
        Band::Telecom => 1,
    }
}

fn visibility_vs_power(doc: &ConfigDoc, seeds: SeedStream) -> Result<ScenarioOutput> {
    let (points, cfg, params) = power_sweep(doc, seeds)?;
    let mut results = Table::new(&[
        ("pump_power_mw", "mW"),
        ("transmission", "1"),
        ("visible_visibility", "1"),
        ("visible_sigma", "1"),
        ("visible_visibility_fit", "1"),
        ("visible_predicted", "1"),
        ("telecom_visibility", "1"),
        ("telecom_sigma", "1"),
        ("telecom_visibility_fit", "1"),
        ("telecom_predicted", "1"),
    ]);
    let mut series: [Vec<(f64, f64)>; 4] = Default::default();
    for p in &points {
        let at = cfg.with_pump(p.pump_mw);
        let mut row = vec![p.pump_mw, p.transmission];
        for band in Band::ALL {
            let s = &p.bands[band_index(band)];
            let predicted =
                expected_visibility(&at, &params, band, model_noise_cps(&at, &params, band));
            let v = nan_or(s.grid, |g| g.visibility);
            row.extend([
                v,
                nan_or(s.grid, |g| g.sigma),
                nan_or(s.fit, |f| f.visibility),
                predicted,
            ]);
            series[2 * band_index(band)].push((p.pump_mw, v));
            series[2 * band_index(band) + 1].push((p.pump_mw, predicted));
        }
        results.push_f64(&row);
    }

    let mut summary = Summary::new();
    summary.value("alpha2", "1", cfg.alpha2);
    summary.value("duration_s", "s", doc.duration_s);
    for band in Band::ALL {
        let vs: Vec<f64> = points
            .iter()
            .filter_map(|p| p.bands[band_index(band)].grid.map(|g| g.visibility))
            .collect();
        let min = vs.iter().copied().fold(f64::NAN, f64::min);
        summary.value(&format!("{}_min_visibility", band.as_str()), "1", min);
    }
    let [vis, vis_model, tel, tel_model] = series;
    let plot = Plot::new(
        "Visibility versus pump power",
        "pump power (mW)",
        "visibility",
    )
    .with(Series::new("visible", vis, Style::Markers, RED))
    .with(Series::new("visible model", vis_model, Style::Line, RED))
    .with(Series::new("telecom", tel, Style::Markers, GREEN))
    .with(Series::new("telecom model", tel_model, Style::Line, GREEN));
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure: None,
    })
}

/// Polynomial fit of measured noise; points with undefined noise are
/// dropped. Returns `None` when too few points remain.
fn noise_fit(points: &[(f64, f64)], degree: usize) -> Result<Option<FitResult>> {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1.is_finite()).collect();
    match fit_noise_polynomial(&finite, degree) {
        Ok(fit) => Ok(Some(fit)),
        Err(Error::Underdetermined { points, params }) => {
            log::warn!("noise fit skipped: {points} points for {params} coefficients");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn eval_poly(fit: Option<&FitResult>, x: f64) -> f64 {
    match fit {
        Some(f) => f.values.iter().rev().fold(0.0, |acc, c| acc * x + c),
        None => f64::NAN,
    }
}

fn summarize_poly(summary: &mut Summary, prefix: &str, unit_x: &str, fit: Option<&FitResult>) {
    if let Some(f) = fit {
        for (k, (name, (v, s))) in f
            .names
            .iter()
            .zip(f.values.iter().zip(&f.sigmas))
            .enumerate()
        {
            let unit = match k {
                0 => "1/s".to_string(),
                1 => format!("1/(s {unit_x})"),
                _ => format!("1/(s {unit_x}^{k})"),
            };
            summary.add(&format!("{prefix}_{name}"), &unit, *v, *s);
        }
    }
}

fn noise_and_net_visibility(doc: &ConfigDoc, seeds: SeedStream) -> Result<ScenarioOutput> {
    let (points, cfg, params) = power_sweep(doc, seeds)?;
    let noise = |band: Band| -> Vec<(f64, f64)> {
        points
            .iter()
            .map(|p| {
                (
                    p.pump_mw,
                    measured_noise_cps(&p.bands[band_index(band)], &cfg, doc.duration_s),
                )
            })
            .collect()
    };
    let measured = [noise(Band::Visible), noise(Band::Telecom)];
    let fits = [
        noise_fit(&measured[0], doc.noise_degree)?,
        noise_fit(&measured[1], doc.noise_degree)?,
    ];

    let mut results = Table::new(&[
        ("pump_power_mw", "mW"),
        ("visible_noise_cps", "1/s"),
        ("visible_noise_fit_cps", "1/s"),
        ("visible_noise_model_cps", "1/s"),
        ("visible_visibility", "1"),
        ("visible_net_visibility", "1"),
        ("visible_net_sigma", "1"),
        ("telecom_noise_cps", "1/s"),
        ("telecom_noise_fit_cps", "1/s"),
        ("telecom_noise_model_cps", "1/s"),
        ("telecom_visibility", "1"),
        ("telecom_net_visibility", "1"),
        ("telecom_net_sigma", "1"),
    ]);
    let mut plot_noise: [Vec<(f64, f64)>; 4] = Default::default();
    for (k, p) in points.iter().enumerate() {
        let at = cfg.with_pump(p.pump_mw);
        let mut row = vec![p.pump_mw];
        for band in Band::ALL {
            let i = band_index(band);
            let s = &p.bands[i];
            let fitted = eval_poly(fits[i].as_ref(), p.pump_mw);
            row.extend([
                measured[i][k].1,
                fitted,
                model_noise_cps(&at, &params, band),
                nan_or(s.grid, |g| g.visibility),
                nan_or(s.net, |g| g.visibility),
                nan_or(s.net, |g| g.sigma),
            ]);
            plot_noise[2 * i].push(measured[i][k]);
            plot_noise[2 * i + 1].push((p.pump_mw, fitted));
        }
        results.push_f64(&row);
    }

    let mut summary = Summary::new();
    summary.value("duration_s", "s", doc.duration_s);
    summary.value("noise_degree", "1", doc.noise_degree as f64);
    for band in Band::ALL {
        let b = band.as_str();
        let i = band_index(band);
        summarize_poly(&mut summary, &format!("{b}_noise"), "mW", fits[i].as_ref());
        let nets: Vec<f64> = points
            .iter()
            .filter_map(|p| p.bands[i].net.map(|g| g.visibility))
            .collect();
        summary.value(
            &format!("{b}_min_net_visibility"),
            "1",
            nets.iter().copied().fold(f64::NAN, f64::min),
        );
        let last = points.last().and_then(|p| p.bands[i].grid);
        summary.value(
            &format!("{b}_visibility_at_max_pump"),
            "1",
            nan_or(last, |g| g.visibility),
        );
    }
    let [vn, vf, tn, tf] = plot_noise;
    let plot = Plot::new(
        "Background versus pump power",
        "pump power (mW)",
        "noise (counts/s)",
    )
    .with(Series::new("visible", vn, Style::Markers, RED))
    .with(Series::new("visible fit", vf, Style::Line, RED))
    .with(Series::new("telecom", tn, Style::Markers, GREEN))
    .with(Series::new("telecom fit", tf, Style::Line, GREEN));
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure: None,
    })
}

fn visibility_vs_alpha(doc: &ConfigDoc, seeds: SeedStream) -> Result<ScenarioOutput> {
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = acquisition(doc);
    let phases = scan_phases(doc.fringe_points);
    let alphas = doc.alpha2_grid();
    let sweeps = alphas
        .par_iter()
        .enumerate()
        .map(|(k, &a2)| {
            let m = measure_fringe(
                &cfg.with_alpha2(a2),
                &params,
                &phases,
                acq,
                seeds.child(k as u64),
            )?;
            Ok([m.summary(Band::Visible), m.summary(Band::Telecom)])
        })
        .collect::<Result<Vec<_>>>()?;

    let measured: Vec<Vec<(f64, f64)>> = Band::ALL
        .iter()
        .map(|&band| {
            alphas
                .iter()
                .zip(&sweeps)
                .map(|(&a2, s)| {
                    (
                        a2,
                        measured_noise_cps(&s[band_index(band)], &cfg, acq.duration_s),
                    )
                })
                .collect()
        })
        .collect();
    let fits = [
        noise_fit(&measured[0], doc.noise_degree)?,
        noise_fit(&measured[1], doc.noise_degree)?,
    ];

    let mut results = Table::new(&[
        ("alpha2", "1"),
        ("visible_visibility", "1"),
        ("visible_sigma", "1"),
        ("visible_noise_cps", "1/s"),
        ("visible_noise_fit_cps", "1/s"),
        ("visible_model_visibility", "1"),
        ("visible_predicted", "1"),
        ("telecom_visibility", "1"),
        ("telecom_sigma", "1"),
        ("telecom_noise_cps", "1/s"),
        ("telecom_noise_fit_cps", "1/s"),
        ("telecom_model_visibility", "1"),
        ("telecom_predicted", "1"),
    ]);
    let mut plot_series: [Vec<(f64, f64)>; 4] = Default::default();
    for (k, (&a2, s)) in alphas.iter().zip(&sweeps).enumerate() {
        let at = cfg.with_alpha2(a2);
        let mut row = vec![a2];
        for band in Band::ALL {
            let i = band_index(band);
            let fitted = eval_poly(fits[i].as_ref(), a2);
            let model = if fitted.is_finite() {
                expected_visibility(&at, &params, band, fitted.max(0.0))
            } else {
                f64::NAN
            };
            let v = nan_or(s[i].grid, |g| g.visibility);
            row.extend([
                v,
                nan_or(s[i].grid, |g| g.sigma),
                measured[i][k].1,
                fitted,
                model,
                expected_visibility(&at, &params, band, model_noise_cps(&at, &params, band)),
            ]);
            plot_series[2 * i].push((a2, v));
            plot_series[2 * i + 1].push((a2, model));
        }
        results.push_f64(&row);
    }

    let mut summary = Summary::new();
    summary.value("pump_power_mw", "mW", cfg.pump_power_mw);
    summary.value("duration_s", "s", acq.duration_s);
    summary.value("noise_degree", "1", doc.noise_degree as f64);
    for band in Band::ALL {
        let b = band.as_str();
        let i = band_index(band);
        summarize_poly(
            &mut summary,
            &format!("{b}_noise"),
            "alpha2",
            fits[i].as_ref(),
        );
        let min = alphas
            .iter()
            .zip(&sweeps)
            .filter(|(&a2, _)| a2 > 0.01)
            .filter_map(|(_, s)| s[i].grid.map(|g| g.visibility))
            .fold(f64::NAN, f64::min);
        summary.value(&format!("{b}_min_visibility_alpha2_above_0.01"), "1", min);
    }
    let [v, vm, t, tm] = plot_series;
    let plot = Plot::new(
        "Visibility versus mean photon number",
        "mean photon number",
        "visibility",
    )
    .log_x()
    .with(Series::new("visible", v, Style::Markers, RED))
    .with(Series::new("visible model", vm, Style::Line, RED))
    .with(Series::new("telecom", t, Style::Markers, GREEN))
    .with(Series::new("telecom model", tm, Style::Line, GREEN));
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure: None,
    })
}

fn fit(doc: &ConfigDoc, seeds: SeedStream, input: Option<&Table>) -> Result<ScenarioOutput> {
    let triples = match input {
        Some(table) => conversion_counts_from_table(table)?,
        None => {
            let (cfg, params) = (doc.circuit(), doc.converter());
            let pumps = doc.pump_grid(doc.conversion_points);
            sample_conversion_curve(&cfg, &params, &pumps, doc.duration_s, seeds)?
                .into_iter()
                .map(|c| (c.pump_mw, c.visible_counts as f64, c.telecom_counts as f64))
                .collect()
        }
    };
    let c0 = triples
        .iter()
        .find(|t| t.0 == 0.0)
        .map(|t| t.1)
        .ok_or_else(|| {
            Error::DegenerateData("a zero-pump row is needed to normalise the counts".into())
        })?;
    if !(c0 > 0.0) {
        return Err(Error::DegenerateData(
            "zero-pump visible count is zero".into(),
        ));
    }
    let observed: Vec<(f64, f64)> = triples.iter().map(|t| (t.0, t.1 / c0)).collect();
    let fit = fit_conversion_curve(&observed, None)?;
    let ratios = transmittance_ratio(&triples, c0)?;
    let (a, eta) = (fit.values[0], fit.values[1]);

    let mut results = Table::new(&[
        ("pump_power_mw", "mW"),
        ("visible_counts", UNIT_COUNTS),
        ("telecom_counts", UNIT_COUNTS),
        ("observed_transmission", "1"),
        ("fitted_transmission", "1"),
        ("residual", "1"),
        ("transmittance_ratio", "1"),
    ]);
    let model = |p: f64| crate::analysis::conversion_model(a, eta, p);
    for (k, t) in triples.iter().enumerate() {
        results.push(vec![
            fmt_f64(t.0),
            fmt_count(t.1),
            fmt_count(t.2),
            fmt_f64(observed[k].1),
            fmt_f64(model(t.0)),
            fmt_f64(fit.residuals[k]),
            fmt_f64(ratio_lookup(&ratios, t.0)),
        ]);
    }

    let mut summary = Summary::new();
    summary.value("points", "1", triples.len() as f64);
    summary.value("zero_pump_counts", "1", c0);
    let failure = summarize_fit(&mut summary, &fit);
    summary.value(
        "mean_transmittance_ratio_above_50mw",
        "1",
        mean_ratio_above(&ratios, 50.0),
    );

    let p_max = triples.iter().map(|t| t.0).fold(0.0, f64::max);
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| p_max * i as f64 / 200.0)
        .map(|p| (p, model(p)))
        .collect();
    let plot = Plot::new(
        "Unconverted fraction versus pump power",
        "pump power (mW)",
        "T",
    )
    .with(Series::new("observed", observed, Style::Markers, BLACK))
    .with(Series::new("fit", curve, Style::Line, BLUE))
    .with(Series::new("ratio T_T/T_V", ratios, Style::Markers, GREEN));
    Ok(ScenarioOutput {
        results,
        summary: summary.0,
        plot,
        failure,
    })
}

/// Counts read from a table are integers by schema.
fn fmt_count(x: f64) -> String {
    format!("{}", x as u64)
}

/// Everything needed for a file-producing run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scenario: ScenarioKind,
    /// Overrides file; the bundled calibration when `None`.
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub overrides: Overrides,
    /// Count table for the `fit` scenario.
    pub input: Option<PathBuf>,
    pub plot: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: ScenarioKind,
    seed: u64,
    config_source: Option<String>,
    input: Option<String>,
    overrides: Overrides,
    artifacts: Vec<&'static str>,
    config: &'a ConfigDoc,
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.svg";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Resolves the configuration, executes the scenario and writes its
/// artifacts. Returns the output directory's artifacts on success; a fit
/// failure is returned as an error after the artifacts are written.
pub fn run(opts: &RunOptions) -> Result<ScenarioOutput> {
    let base = match &opts.config {
        Some(path) => ConfigDoc::load(path)?,
        None => ConfigDoc::calibration(),
    };
    let doc = resolve(opts.scenario, base, opts.overrides)?;
    let input = match (&opts.input, opts.scenario) {
        (Some(path), ScenarioKind::Fit) => Some(Table::read(path)?),
        (Some(_), other) => {
            return Err(Error::Config(format!(
                "--input is only used by the fit scenario, not `{other}`"
            )));
        }
        (None, _) => None,
    };
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    log::info!("running {} with seed {}", opts.scenario, opts.seed);
    let mut output = execute(opts.scenario, &doc, opts.seed, input.as_ref())?;

    let mut artifacts = vec![RESULTS_FILE, SUMMARY_FILE, CONFIG_FILE, MANIFEST_FILE];
    output.results.write(&opts.out_dir.join(RESULTS_FILE))?;
    output.summary.write(&opts.out_dir.join(SUMMARY_FILE))?;
    write_file(&opts.out_dir.join(CONFIG_FILE), &doc.to_toml())?;
    if opts.plot {
        write_file(&opts.out_dir.join(PLOT_FILE), &output.plot.to_svg())?;
        artifacts.push(PLOT_FILE);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: opts.scenario,
        seed: opts.seed,
        config_source: opts.config.as_ref().map(|p| p.display().to_string()),
        input: opts.input.as_ref().map(|p| p.display().to_string()),
        overrides: opts.overrides,
        artifacts,
        config: &doc,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&opts.out_dir.join(MANIFEST_FILE), &(json + "\n"))?;

    match output.failure.take() {
        Some(e) => Err(e),
        None => Ok(output),
    }
}
