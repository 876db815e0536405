//! Ingest a pump-sweep count table and fit the conversion curve and the
//! transmittance ratio of the two output arms.
//!
//! Run with `cargo run --example fit_conversion -- path/to/counts.csv`. The
//! table needs `pump_power_mw`, `visible_counts` and `telecom_counts`
//! columns and a units line. Without an argument a table is generated first.

use freqsplit::analysis::{fit_conversion_curve, transmittance_ratio};
use freqsplit::config::ConfigDoc;
use freqsplit::detection::SeedStream;
use freqsplit::experiment::sample_conversion_curve;
use freqsplit::table::{conversion_counts_from_table, fmt_f64, Table, UNIT_COUNTS};

fn synthetic() -> freqsplit::Result<Table> {
    let doc = ConfigDoc::calibration();
    let pumps = doc.pump_grid(15);
    let counts = sample_conversion_curve(
        &doc.circuit(),
        &doc.converter(),
        &pumps,
        10.0,
        SeedStream::new(2),
    )?;
    let mut t = Table::new(&[
        ("pump_power_mw", "mW"),
        ("visible_counts", UNIT_COUNTS),
        ("telecom_counts", UNIT_COUNTS),
    ]);
    for c in counts {
        t.push(vec![
            fmt_f64(c.pump_mw),
            c.visible_counts.to_string(),
            c.telecom_counts.to_string(),
        ]);
    }
    Ok(t)
}

fn main() -> freqsplit::Result<()> {
    let table = match std::env::args().nth(1) {
        Some(path) => Table::read(path.as_ref())?,
        None => synthetic()?,
    };
    let rows = conversion_counts_from_table(&table)?;
    let c0 = rows
        .iter()
        .find(|r| r.0 == 0.0)
        .map(|r| r.1)
        .expect("zero-pump row");
    let observed: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1 / c0)).collect();
    let fit = fit_conversion_curve(&observed, None)?;
    println!(
        "A = {:.4} +- {:.4}, eta = {:.5} +- {:.5} /mW, converged = {}",
        fit.values[0], fit.sigmas[0], fit.values[1], fit.sigmas[1], fit.converged
    );
    println!("pump_mw  T_obs   T_T/T_V");
    let ratios = transmittance_ratio(&rows, c0)?;
    for (p, t) in &observed {
        let ratio = ratios.iter().find(|r| r.0 == *p).map_or(f64::NAN, |r| r.1);
        println!("{p:7.1}  {t:.4}  {ratio:.4}");
    }
    Ok(())
}
