//! Acceptance checks. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freqsplit::analysis::{
    conversion_model, conversion_model_gradient, fit_conversion_curve, predict_visibility,
    transmittance_ratio,
};
use freqsplit::circuit::{detected_state, scan_phases, CircuitConfig};
use freqsplit::config::{linspace, ConfigDoc};
use freqsplit::converter::ConverterParams;
use freqsplit::detection::{sample_poisson, visibility_from_extremes, SeedStream};
use freqsplit::experiment::{
    measure_fringe, observed_transmission, sample_conversion_curve, Acquisition,
};
use freqsplit::mode::{Band, ModeLabel, OpticalState, TimeBin};
use freqsplit::scenario::{execute, resolve, Overrides, ScenarioKind};
use freqsplit::table::Table;

const SEED: u64 = 20_130_501;

struct Outcome {
    detail: String,
    failures: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            detail: String::new(),
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn note(&mut self, text: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(text.as_ref());
    }

    fn within_time(&mut self, started: Instant, limit_s: u64) {
        let elapsed = started.elapsed();
        self.note(format!("{:.3} s", elapsed.as_secs_f64()));
        self.check(
            elapsed < Duration::from_secs(limit_s),
            format!("runtime {elapsed:?} over {limit_s} s"),
        );
    }
}

fn summary_value(summary: &Table, quantity: &str) -> f64 {
    let names = summary.str_column("quantity").unwrap();
    let values = summary.f64_column("value").unwrap();
    let i = names
        .iter()
        .position(|n| *n == quantity)
        .unwrap_or_else(|| panic!("no `{quantity}` in summary"));
    values[i]
}

fn fringe_visibilities() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    let doc = ConfigDoc::calibration();
    assert_eq!(doc.fringe_points, 16);
    assert_eq!(doc.duration_s, 1.0);
    let run = execute(ScenarioKind::Fringe, &doc, SEED, None).unwrap();
    let vis = summary_value(&run.summary, "visible_visibility");
    let tel = summary_value(&run.summary, "telecom_visibility");
    out.note(format!("V_visible = {vis:.4}, V_telecom = {tel:.4}"));
    out.check(
        (vis - 0.98).abs() <= 0.01,
        format!("visible V {vis} not 0.98 +- 0.01"),
    );
    out.check(
        (tel - 0.99).abs() <= 0.01,
        format!("telecom V {tel} not 0.99 +- 0.01"),
    );
    out.within_time(started, 5);
    out
}

fn conversion_fit_recovery() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    assert_eq!((params.saturation, params.coupling_per_mw), (0.94, 0.0044));
    let pumps = linspace(0.0, 700.0, 10);
    // About 1e4 counts at zero pump.
    let zero_pump_rate =
        cfg.clock_hz * cfg.alpha2 * cfg.input_transmittance * cfg.visible_transmittance;
    let duration = 1e4 / zero_pump_rate;
    let stream = SeedStream::new(SEED);
    let mut good = 0;
    for run in 0..100 {
        let counts =
            sample_conversion_curve(&cfg, &params, &pumps, duration, stream.child(run)).unwrap();
        let obs = observed_transmission(&counts).unwrap();
        let fit = fit_conversion_curve(&obs, None).unwrap();
        let (a, eta) = (fit.values[0], fit.values[1]);
        if fit.converged && (a - 0.94).abs() <= 0.02 && (eta / 0.0044 - 1.0).abs() <= 0.05 {
            good += 1;
        }
    }
    out.note(format!("{good}/100 fits within tolerance"));
    out.check(
        good >= 95,
        format!("only {good} of 100 fits recovered (A, eta)"),
    );
    out.within_time(started, 30);
    out
}

fn maximum_conversion() -> Outcome {
    let mut out = Outcome::new();
    let doc = ConfigDoc::calibration();
    let run = execute(ScenarioKind::ConversionCurve, &doc, SEED, None).unwrap();
    let pumps = run.results.f64_column("pump_power_mw").unwrap();
    let rates = run.results.f64_column("telecom_rate_cps").unwrap();
    let k = (0..rates.len())
        .max_by(|&i, &j| rates[i].total_cmp(&rates[j]))
        .unwrap();
    let peak = pumps[k];
    let fitted = summary_value(&run.summary, "fitted_peak_pump_mw");
    out.note(format!(
        "telecom rate peaks at {peak} mW (fit from counts: {fitted:.1} mW)"
    ));
    out.check((peak - 560.0).abs() <= 15.0, format!("peak at {peak} mW"));
    out
}

fn net_visibility_restored() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    // Long acquisitions keep the window counts in the 10^4 range so the
    // background subtraction is not dominated by Poisson noise.
    let overrides = Overrides {
        duration_s: Some(100.0),
        ..Default::default()
    };
    let doc = resolve(
        ScenarioKind::NoiseAndNetVisibility,
        ConfigDoc::calibration(),
        overrides,
    )
    .unwrap();
    let run = execute(ScenarioKind::NoiseAndNetVisibility, &doc, SEED, None).unwrap();
    let pumps = run.results.f64_column("pump_power_mw").unwrap();
    let raw = run.results.f64_column("visible_visibility").unwrap();
    let last = pumps.len() - 1;
    assert_eq!(pumps[last], 700.0);
    out.note(format!("raw visible V at 700 mW = {:.4}", raw[last]));
    out.check(
        (raw[last] - 0.88).abs() <= 0.02,
        format!("raw V at 700 mW is {}", raw[last]),
    );
    for band in ["visible", "telecom"] {
        let net = run
            .results
            .f64_column(&format!("{band}_net_visibility"))
            .unwrap();
        let mut min = f64::INFINITY;
        for (p, v) in pumps.iter().zip(&net) {
            if band == "telecom" && *p == 0.0 {
                // No converted signal without pump.
                continue;
            }
            min = min.min(*v);
            out.check(*v > 0.98, format!("{band} net V {v} at {p} mW"));
        }
        out.note(format!("min net {band} V = {min:.4}"));
    }
    out.within_time(started, 60);
    out
}

fn expected(cfg: &CircuitConfig, params: &ConverterParams, band: Band) -> f64 {
    let t = cfg.overall_transmittance(params, band).unwrap();
    let d = params.background_rate(band, cfg.pump_power_mw, cfg.alpha2);
    predict_visibility(cfg.alpha2, t, cfg.clock_hz, d).unwrap()
}

fn visibility_vs_alpha_model() -> Outcome {
    let mut out = Outcome::new();
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    // 26 comparisons at 3 sigma: about 7% of seeds show one excursion even
    // with a calibrated estimator, so this criterion has its own fixed seed.
    let stream = SeedStream::new(SEED + 5);
    let mut worst: f64 = 0.0;
    let mut zs = Vec::new();
    let mut min_above = [f64::INFINITY; 2];
    for (k, a2) in doc.alpha2_grid().into_iter().enumerate() {
        let at = cfg.with_alpha2(a2);
        // Scale the acquisition so the fringe maximum holds ~2e4 counts.
        let weakest = Band::ALL
            .iter()
            .map(|&b| a2 * at.overall_transmittance(&params, b).unwrap() * at.clock_hz)
            .fold(f64::INFINITY, f64::min);
        let acq = Acquisition {
            duration_s: (2e4 / weakest).max(1.0),
            bin_width_s: doc.bin_width_s(),
        };
        let m =
            measure_fringe(&at, &params, &scan_phases(16), acq, stream.child(k as u64)).unwrap();
        for (i, band) in Band::ALL.into_iter().enumerate() {
            let est = m.summary(band).grid.unwrap();
            let model = expected(&at, &params, band);
            let z = (est.visibility - model) / est.sigma;
            worst = worst.max(z.abs());
            zs.push(z);
            out.check(
                z.abs() <= 3.0,
                format!(
                    "{band} at alpha2 = {a2:.4}: V = {} vs model {model} ({z:.2} sigma)",
                    est.visibility
                ),
            );
            if a2 > 0.01 {
                min_above[i] = min_above[i].min(est.visibility);
                out.check(
                    est.visibility > 0.9,
                    format!("{band} V {} at alpha2 = {a2}", est.visibility),
                );
            }
        }
    }
    // No systematic offset across the sweep either.
    let mean_z = zs.iter().sum::<f64>() / zs.len() as f64;
    out.check(
        mean_z.abs() <= 3.0 / (zs.len() as f64).sqrt(),
        format!("mean z {mean_z:.2}"),
    );
    out.note(format!(
        "mean z = {mean_z:.2}, max |z| = {worst:.2}; min V above 0.01: visible {:.4}, telecom {:.4}",
        min_above[0], min_above[1]
    ));
    out
}

fn transmittance_ratio_flat() -> Outcome {
    let mut out = Outcome::new();
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    assert!((cfg.telecom_transmittance / cfg.visible_transmittance - 1.5).abs() < 1e-12);
    let pumps = doc.pump_grid(doc.conversion_points);
    let counts =
        sample_conversion_curve(&cfg, &params, &pumps, 3600.0, SeedStream::new(SEED)).unwrap();
    let c0 = counts[0].visible_counts as f64;
    let triples: Vec<(f64, f64, f64)> = counts
        .iter()
        .map(|c| (c.pump_mw, c.visible_counts as f64, c.telecom_counts as f64))
        .collect();
    let ratios = transmittance_ratio(&triples, c0).unwrap();
    let above: Vec<&(f64, f64)> = ratios.iter().filter(|r| r.0 > 50.0).collect();
    out.check(
        above.len() == pumps.iter().filter(|&&p| p > 50.0).count(),
        "missing ratio points",
    );
    let (lo, hi) = above
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.1), hi.max(r.1))
        });
    out.note(format!("ratio over P > 50 mW in [{lo:.4}, {hi:.4}]"));
    for r in above {
        out.check(
            (r.1 - 1.5).abs() <= 0.05,
            format!("ratio {} at {} mW", r.1, r.0),
        );
    }
    out
}

fn random_state(rng: &mut ChaCha8Rng) -> OpticalState {
    ModeLabel::all().fold(OpticalState::vacuum(), |s, m| {
        s.with_amplitude(
            m,
            Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
        )
    })
}

fn property_suite() -> Outcome {
    let mut out = Outcome::new();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let vis_e = ModeLabel::new(Band::Visible, TimeBin::Early);
    let tel_e = ModeLabel::new(Band::Telecom, TimeBin::Early);

    let mut unitarity: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_state(&mut rng);
        let r = rng.random_range(0.0..=1.0);
        let phi = rng.random_range(-10.0..10.0);
        let t = s.apply_beamsplitter(vis_e, tel_e, r, phi).unwrap();
        unitarity =
            unitarity.max((t.total_mean_photon_number() - s.total_mean_photon_number()).abs());
        let back = t
            .apply_beamsplitter(vis_e, tel_e, r, phi + std::f64::consts::PI)
            .unwrap();
        unitarity = unitarity.max(back.max_abs_diff(&s));
    }
    out.check(
        unitarity <= 1e-12,
        format!("beamsplitter unitarity error {unitarity:e}"),
    );

    let params = ConverterParams::default();
    let mut sum_exact = true;
    for _ in 0..1000 {
        let e = params.efficiency(rng.random_range(0.0..2000.0)).unwrap();
        sum_exact &= e.transmission + e.conversion == 1.0;
    }
    out.check(sum_exact, "T + R != 1 exactly");

    // Relative phase of the two time bins survives conversion in both bands.
    let mut phase_err: f64 = 0.0;
    let base = ConfigDoc::calibration().circuit();
    for _ in 0..1000 {
        let delta = rng.random_range(-3.0..3.0);
        let p = ConverterParams {
            pump_phase: rng.random_range(-3.0..3.0),
            ..ConverterParams::default()
        };
        let cfg = base
            .with_pump(rng.random_range(1.0..700.0))
            .with_scan_phase(delta);
        let s = detected_state(&cfg, &p).unwrap();
        for band in Band::ALL {
            let ratio = s.amplitude(ModeLabel::new(band, TimeBin::Late))
                / s.amplitude(ModeLabel::new(band, TimeBin::Early));
            let diff = (ratio.arg() - delta + std::f64::consts::PI)
                .rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            phase_err = phase_err.max(diff.abs());
        }
    }
    out.check(
        phase_err <= 1e-12,
        format!("phase preservation error {phase_err:e}"),
    );

    // Grid estimator at >= 1e3 counts per point.
    let (mean_max, mean_min) = (2e4, 1e3);
    let truth = (mean_max - mean_min) / (mean_max + mean_min);
    let (mut within, mut sum) = (0, 0.0);
    let runs = 1000;
    for _ in 0..runs {
        let n_max = sample_poisson(&mut rng, mean_max).unwrap() as f64;
        let n_min = sample_poisson(&mut rng, mean_min).unwrap() as f64;
        let est = visibility_from_extremes(n_max, n_min).unwrap();
        sum += est.visibility;
        if (est.visibility - truth).abs() <= 3.0 * est.sigma {
            within += 1;
        }
    }
    let mean = sum / runs as f64;
    let sigma_mean =
        visibility_from_extremes(mean_max, mean_min).unwrap().sigma / (runs as f64).sqrt();
    out.check(
        within >= 990,
        format!("only {within}/{runs} estimates within 3 sigma"),
    );
    out.check(
        (mean - truth).abs() <= 3.0 * sigma_mean,
        format!("estimator mean {mean} vs {truth}"),
    );

    let mut jac_err: f64 = 0.0;
    for _ in 0..1000 {
        let (a, eta, p) = (
            rng.random_range(0.5..1.0),
            rng.random_range(0.001..0.01),
            rng.random_range(1.0..700.0),
        );
        let g = conversion_model_gradient(a, eta, p);
        let fd = |f: &dyn Fn(f64) -> f64, x: f64| {
            let h = 1e-6 * x;
            (f(x + h) - f(x - h)) / (2.0 * h)
        };
        let da = fd(&|x| conversion_model(x, eta, p), a);
        let de = fd(&|x| conversion_model(a, x, p), eta);
        for (an, num) in [(g[0], da), (g[1], de)] {
            let scale = an.abs().max(num.abs()).max(1e-8);
            jac_err = jac_err.max((an - num).abs() / scale);
        }
    }
    out.check(
        jac_err <= 1e-6,
        format!("Jacobian relative error {jac_err:e}"),
    );
    out.note(format!(
        "unitarity {unitarity:.1e}, phase {phase_err:.1e}, estimator {within}/{runs} within 3 sigma, Jacobian {jac_err:.1e}"
    ));
    out.within_time(started, 10);
    out
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 fringe visibilities at T = 0.5", fringe_visibilities),
        ("2 conversion-curve fit recovery", conversion_fit_recovery),
        ("3 maximum-conversion pump power", maximum_conversion),
        (
            "4 net visibility after background subtraction",
            net_visibility_restored,
        ),
        (
            "5 visibility versus mean photon number",
            visibility_vs_alpha_model,
        ),
        ("6 transmittance-ratio flatness", transmittance_ratio_flat),
        ("7 property suite", property_suite),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(out) if out.failures.is_empty() => println!("PASS criterion {name}: {}", out.detail),
            Ok(out) => {
                failed += 1;
                println!("FAIL criterion {name}: {}", out.detail);
                for f in out.failures {
                    println!("    {f}");
                }
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
