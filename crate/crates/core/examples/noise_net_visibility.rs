//! Off-peak background versus pump power with non-negative polynomial fits,
//! and the net visibility after subtracting it.
//!
//! Run with `cargo run --release --example noise_net_visibility`.

use freqsplit::analysis::fit_noise_polynomial;
use freqsplit::circuit::scan_phases;
use freqsplit::config::ConfigDoc;
use freqsplit::detection::SeedStream;
use freqsplit::experiment::{measure_fringe, Acquisition};
use freqsplit::mode::Band;

fn main() -> freqsplit::Result<()> {
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = Acquisition {
        duration_s: 100.0,
        ..Acquisition::default()
    };
    let seeds = SeedStream::new(5);
    let mut noise = [Vec::new(), Vec::new()];
    println!("pump_mw  d_vis    d_tel    rawV_vis  netV_vis  rawV_tel  netV_tel");
    for (k, pump) in doc.pump_grid(8).into_iter().enumerate() {
        let m = measure_fringe(
            &cfg.with_pump(pump),
            &params,
            &scan_phases(16),
            acq,
            seeds.child(k as u64),
        )?;
        let (vis, tel) = (m.summary(Band::Visible), m.summary(Band::Telecom));
        let rate = |b: f64| b / acq.duration_s;
        noise[0].push((pump, rate(vis.background_counts)));
        noise[1].push((pump, rate(tel.background_counts)));
        let v = |g: Option<freqsplit::detection::VisibilityEstimate>| {
            g.map_or(f64::NAN, |g| g.visibility)
        };
        println!(
            "{pump:7.1}  {:7.3}  {:7.3}  {:.4}    {:.4}    {:.4}    {:.4}",
            rate(vis.background_counts),
            rate(tel.background_counts),
            v(vis.grid),
            v(vis.net),
            v(tel.grid),
            v(tel.net),
        );
    }
    for (band, points) in Band::ALL.iter().zip(&noise) {
        let fit = fit_noise_polynomial(points, 2)?;
        println!("{band} noise fit (counts/s, P in mW): {:?}", fit.values);
    }
    Ok(())
}
