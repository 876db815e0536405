//! One acquisition as the time-to-digital converter sees it: per-peak count
//! records, the binned arrival-time histogram around the three peaks, and the
//! counts inside a post-selection window as it is widened.
//!
//! Run with `cargo run --example tdc_histogram`.

use freqsplit::circuit::propagate;
use freqsplit::config::ConfigDoc;
use freqsplit::detection::{
    acquire, estimate_background, histogram, postselect_window, SeedStream, TimeAxis,
};
use freqsplit::mode::Band;
use freqsplit::table::records_to_table;

fn main() -> freqsplit::Result<()> {
    let doc = ConfigDoc::calibration();
    let (cfg, params) = (doc.circuit(), doc.converter());
    let rates = propagate(&cfg, &params)?;
    let mut rng = SeedStream::new(4).rng();
    let records = acquire(&rates, &cfg, 1.0, &mut rng)?;
    print!("{}", records_to_table(&records).to_csv());

    let visible: Vec<_> = records
        .into_iter()
        .filter(|r| r.detector == Band::Visible)
        .collect();
    let axis = TimeAxis::from_config(&cfg);
    let hist = histogram(&visible, axis, 50e-12, &mut rng)?;
    println!("\nvisible histogram near the peaks (50-ps bins):");
    for (lo, _, n) in hist
        .bins()
        .filter(|(lo, _, _)| (-400e-12..1600e-12).contains(lo))
    {
        println!(
            "{:7.0} ps  {n:5}  {}",
            lo * 1e12,
            "#".repeat((n / 20) as usize)
        );
    }
    let middle = cfg.delay_s;
    for window_ps in [100.0, 200.0, 400.0, 600.0] {
        let n = postselect_window(&hist, middle, window_ps * 1e-12)?;
        println!("window {window_ps:3.0} ps: {n} counts");
    }
    println!(
        "background per 200-ps window: {:.2}",
        estimate_background(&hist, 200e-12)?
    );
    Ok(())
}
