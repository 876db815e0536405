//! Simulated acquisitions: expected rates, Poisson records, TDC histogram,
//! window post-selection and off-peak background estimation, chained the
//! way a measurement is taken.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::net_visibility;
use crate::circuit::{conversion_curve, propagate, CircuitConfig, PeakRates};
use crate::converter::ConverterParams;
use crate::detection::{
    acquire, estimate_background, estimate_visibility, estimate_visibility_fit, histogram,
    postselect_middle, sample_counts_with, CountRecord, FringeFit, SeedStream, TimeAxis,
    VisibilityEstimate,
};
use crate::error::Result;
use crate::mode::Band;

/// Acquisition settings shared by every scan point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    /// Integration time per point, s.
    pub duration_s: f64,
    pub bin_width_s: f64,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            bin_width_s: 10e-12,
        }
    }
}

/// What one detector reports for one scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandObservation {
    /// Counts in the middle post-selection window.
    pub middle_counts: u64,
    /// Off-peak background rescaled to one window, counts.
    pub background_counts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub phase: f64,
    pub rates: PeakRates,
    pub records: Vec<CountRecord>,
    pub visible: BandObservation,
    pub telecom: BandObservation,
}

impl Observation {
    pub fn band(&self, band: Band) -> &BandObservation {
        match band {
            Band::Visible => &self.visible,
            Band::Telecom => &self.telecom,
        }
    }
}

/// One acquisition at the configuration's scan phase.
pub fn observe(
    config: &CircuitConfig,
    params: &ConverterParams,
    acq: Acquisition,
    seeds: SeedStream,
) -> Result<Observation> {
    let rates = propagate(config, params)?;
    let mut rng = seeds.rng();
    let records = acquire(&rates, config, acq.duration_s, &mut rng)?;
    let axis = TimeAxis::from_config(config);
    let mut band_obs = |band: Band| -> Result<BandObservation> {
        let own: Vec<CountRecord> = records
            .iter()
            .filter(|r| r.detector == band)
            .cloned()
            .collect();
        let hist = histogram(&own, axis, acq.bin_width_s, &mut rng)?;
        Ok(BandObservation {
            middle_counts: postselect_middle(&hist, config.window_s)?,
            background_counts: estimate_background(&hist, config.window_s)?,
        })
    };
    let visible = band_obs(Band::Visible)?;
    let telecom = band_obs(Band::Telecom)?;
    Ok(Observation {
        phase: config.scan_phase,
        rates,
        records,
        visible,
        telecom,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeMeasurement {
    pub acquisition: Acquisition,
    pub points: Vec<Observation>,
}

/// Per-band summary of a fringe scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeSummary {
    /// `None` when the scan has no counts at all.
    pub grid: Option<VisibilityEstimate>,
    pub fit: Option<FringeFit>,
    /// Mean off-peak background per window, counts.
    pub background_counts: f64,
    /// Visibility after subtracting `background_counts`.
    pub net: Option<VisibilityEstimate>,
}

impl FringeMeasurement {
    pub fn scan(&self, band: Band) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .map(|o| (o.phase, o.band(band).middle_counts as f64))
            .collect()
    }

    pub fn mean_background(&self, band: Band) -> f64 {
        self.points
            .iter()
            .map(|o| o.band(band).background_counts)
            .sum::<f64>()
            / self.points.len() as f64
    }

    pub fn summary(&self, band: Band) -> FringeSummary {
        let scan = self.scan(band);
        let grid = estimate_visibility(&scan).ok();
        let fit = estimate_visibility_fit(&scan).ok();
        let background_counts = self.mean_background(band);
        let net = grid.and_then(|g| net_visibility(g.n_max, g.n_min, background_counts).ok());
        FringeSummary {
            grid,
            fit,
            background_counts,
            net,
        }
    }
}

/// Fringe scan: scan point `k` draws from `seeds.child(k)`.
pub fn measure_fringe(
    config: &CircuitConfig,
    params: &ConverterParams,
    phases: &[f64],
    acq: Acquisition,
    seeds: SeedStream,
) -> Result<FringeMeasurement> {
    let points = phases
        .par_iter()
        .enumerate()
        .map(|(k, &phase)| {
            observe(
                &config.with_scan_phase(phase),
                params,
                acq,
                seeds.child(k as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FringeMeasurement {
        acquisition: acq,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConversionCounts {
    pub pump_mw: f64,
    pub visible_rate: f64,
    pub telecom_rate: f64,
    pub visible_counts: u64,
    pub telecom_counts: u64,
}

/// Poisson counts along the conversion curve; pump point `k` draws from
/// `seeds.child(k)`.
pub fn sample_conversion_curve(
    config: &CircuitConfig,
    params: &ConverterParams,
    pumps: &[f64],
    duration_s: f64,
    seeds: SeedStream,
) -> Result<Vec<ConversionCounts>> {
    let curve = conversion_curve(config, params, pumps)?;
    curve
        .into_iter()
        .enumerate()
        .map(|(k, pt)| {
            let mut rng = seeds.child(k as u64).rng();
            Ok(ConversionCounts {
                pump_mw: pt.pump_mw,
                visible_rate: pt.visible_rate,
                telecom_rate: pt.telecom_rate,
                visible_counts: sample_counts_with(&mut rng, pt.visible_rate, duration_s)?,
                telecom_counts: sample_counts_with(&mut rng, pt.telecom_rate, duration_s)?,
            })
        })
        .collect()
}

/// `(P, T_obs)` from sampled counts, normalised by the zero-pump visible
/// count. Returns `None` without a zero-pump point or when it is empty.
pub fn observed_transmission(counts: &[ConversionCounts]) -> Option<Vec<(f64, f64)>> {
    let c0 = counts.iter().find(|c| c.pump_mw == 0.0)?.visible_counts as f64;
    if c0 <= 0.0 {
        return None;
    }
    Some(
        counts
            .iter()
            .map(|c| (c.pump_mw, c.visible_counts as f64 / c0))
            .collect(),
    )
}
