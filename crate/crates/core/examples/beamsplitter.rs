//! The converter as a frequency-domain beamsplitter: split a coherent pulse
//! between the visible and telecom bands and undo the split again.
//!
//! Run with `cargo run --example beamsplitter`.

use freqsplit::converter::ConverterParams;
use freqsplit::mode::{Band, ModeLabel, OpticalState, TimeBin};
use num_complex::Complex64;

fn main() -> freqsplit::Result<()> {
    let vis = ModeLabel::new(Band::Visible, TimeBin::Early);
    let tel = ModeLabel::new(Band::Telecom, TimeBin::Early);
    let input = OpticalState::vacuum().with_amplitude(vis, Complex64::from_polar(0.5, 0.3));

    let params = ConverterParams::default();
    println!("pump_mw  T(P)     R(P)     <n>_vis  <n>_tel  phase_vis  phase_tel");
    for pump in [0.0, 100.0, 165.0, 300.0, 560.0, 700.0] {
        let eff = params.efficiency(pump)?;
        let out = params.apply_conversion(&input, pump)?;
        println!(
            "{pump:7.1}  {:.4}   {:.4}   {:.4}   {:.4}   {:+.4}    {:+.4}",
            eff.transmission,
            eff.conversion,
            out.mean_photon_number(vis),
            out.mean_photon_number(tel),
            out.amplitude(vis).arg(),
            out.amplitude(tel).arg(),
        );
    }

    // A 50:50 beamsplitter followed by its inverse (phase + pi) is the identity.
    let split = input.apply_beamsplitter(vis, tel, 0.5, 0.7)?;
    let back = split.apply_beamsplitter(vis, tel, 0.5, 0.7 + std::f64::consts::PI)?;
    println!("round-trip error: {:.1e}", back.max_abs_diff(&input));
    Ok(())
}
