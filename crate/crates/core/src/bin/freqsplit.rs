//! Command-line runner for the freqsplit scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use freqsplit::scenario::{run, Overrides, RunOptions, ScenarioKind};

#[derive(Debug, Parser)]
#[command(
    name = "freqsplit",
    version,
    about = "Run a frequency-domain beamsplitter scenario"
)]
struct Cli {
    /// conversion-curve, fringe, visibility-vs-power, noise-and-net-visibility,
    /// visibility-vs-alpha or fit
    scenario: ScenarioKind,
    /// TOML file overriding the bundled calibration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Points along the scenario's main sweep
    #[arg(long)]
    points: Option<usize>,
    /// Acquisition time per point, seconds
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
    /// Polynomial degree of the background fits
    #[arg(long)]
    degree: Option<usize>,
    /// Count table to analyse (fit scenario only)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Skip the SVG plot
    #[arg(long)]
    no_plot: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunOptions {
        scenario: cli.scenario,
        config: cli.config,
        seed: cli.seed,
        out_dir: cli.out,
        overrides: Overrides {
            points: cli.points,
            duration_s: cli.duration_s,
            degree: cli.degree,
        },
        input: cli.input,
        plot: !cli.no_plot,
    };
    match run(&opts) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
