//! Visibility versus mean photon number at 165 mW: simulated scans against
//! `V = S / (S + 2d)` with `d` taken from a polynomial fit of the measured
//! background.
//!
//! Run with `cargo run --release --example visibility_vs_alpha`.

use freqsplit::analysis::{fit_noise_polynomial, predict_visibility};
use freqsplit::circuit::scan_phases;
use freqsplit::config::ConfigDoc;
use freqsplit::detection::SeedStream;
use freqsplit::experiment::{measure_fringe, Acquisition};
use freqsplit::mode::Band;

fn main() -> freqsplit::Result<()> {
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = Acquisition {
        duration_s: 20.0,
        ..Acquisition::default()
    };
    let seeds = SeedStream::new(11);
    let alphas = doc.alpha2_grid();
    let mut rows = Vec::new();
    for (k, &a2) in alphas.iter().enumerate() {
        let m = measure_fringe(
            &cfg.with_alpha2(a2),
            &params,
            &scan_phases(16),
            acq,
            seeds.child(k as u64),
        )?;
        rows.push([m.summary(Band::Visible), m.summary(Band::Telecom)]);
    }
    for (i, band) in Band::ALL.into_iter().enumerate() {
        let noise: Vec<(f64, f64)> = alphas
            .iter()
            .zip(&rows)
            .map(|(&a2, r)| (a2, r[i].background_counts / acq.duration_s))
            .collect();
        let fit = fit_noise_polynomial(&noise, 2)?;
        let d = |x: f64| fit.values.iter().rev().fold(0.0, |acc, c| acc * x + c);
        println!("{band}: alpha2    V       sigma   model");
        for (&a2, r) in alphas.iter().zip(&rows) {
            let at = cfg.with_alpha2(a2);
            let t_all = at.overall_transmittance(&params, band)?;
            let model = predict_visibility(a2, t_all, at.clock_hz, d(a2).max(0.0))?;
            let g = r[i].grid.expect("counts present");
            println!(
                "         {a2:.4}  {:.4}  {:.4}  {model:.4}",
                g.visibility, g.sigma
            );
        }
    }
    Ok(())
}
