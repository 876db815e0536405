//! Raw visibility of both bands across the pump range, next to the
//! signal-to-noise model.
//!
//! Run with `cargo run --release --example visibility_vs_power`.

use freqsplit::analysis::predict_visibility;
use freqsplit::circuit::scan_phases;
use freqsplit::config::ConfigDoc;
use freqsplit::detection::SeedStream;
use freqsplit::experiment::{measure_fringe, Acquisition};
use freqsplit::mode::Band;

fn main() -> freqsplit::Result<()> {
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    let acq = Acquisition {
        duration_s: 10.0,
        ..Acquisition::default()
    };
    let seeds = SeedStream::new(3);
    println!("pump_mw  V_vis   model   V_tel   model");
    for (k, pump) in doc.pump_grid(8).into_iter().enumerate() {
        let at = cfg.with_pump(pump);
        let m = measure_fringe(&at, &params, &scan_phases(16), acq, seeds.child(k as u64))?;
        let mut line = format!("{pump:7.1}");
        for band in Band::ALL {
            let v = m.summary(band).grid.map_or(f64::NAN, |g| g.visibility);
            let t_all = at.overall_transmittance(&params, band)?;
            let d = params.background_rate(band, pump, at.alpha2);
            let model = predict_visibility(at.alpha2, t_all, at.clock_hz, d).unwrap_or(f64::NAN);
            line.push_str(&format!("  {v:.4}  {model:.4}"));
        }
        println!("{line}");
    }
    Ok(())
}
