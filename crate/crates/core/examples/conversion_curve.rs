//! Detected counts of the unconverted and converted light versus pump power,
//! the normalised transmission `C/C0` and the fitted conversion curve.
//!
//! Run with `cargo run --release --example conversion_curve`.

use freqsplit::analysis::fit_conversion_curve;
use freqsplit::config::ConfigDoc;
use freqsplit::detection::SeedStream;
use freqsplit::experiment::{observed_transmission, sample_conversion_curve};

fn main() -> freqsplit::Result<()> {
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    let pumps = doc.pump_grid(15);
    let counts = sample_conversion_curve(&cfg, &params, &pumps, 1.0, SeedStream::new(1))?;

    println!("pump_mw  visible  telecom");
    for c in &counts {
        println!(
            "{:7.1}  {:7}  {:7}",
            c.pump_mw, c.visible_counts, c.telecom_counts
        );
    }
    let observed = observed_transmission(&counts).expect("zero-pump point present");
    let fit = fit_conversion_curve(&observed, None)?;
    println!(
        "fit: A = {:.4} +- {:.4}, eta = {:.5} +- {:.5} /mW ({} iterations)",
        fit.values[0], fit.sigmas[0], fit.values[1], fit.sigmas[1], fit.iterations
    );
    println!(
        "maximum conversion at {:.0} mW (configured model: {:.0} mW)",
        std::f64::consts::FRAC_PI_2.powi(2) / fit.values[1],
        params.peak_pump_mw()
    );
    Ok(())
}
