//! The time-bin interferometer around the converter.
//!
//! A pulse is split into an early and a late bin, attenuated, converted, and
//! then each band passes an unbalanced interferometer with the same delay.
//! Three arrival peaks result per detector; only the middle one, where the
//! early-long and late-short paths overlap, depends on the scan phase.

use serde::{Deserialize, Serialize};

use crate::converter::ConverterParams;
use crate::error::{check_non_negative, check_unit_interval, Error, Result};
use crate::mode::{Band, ModeLabel, OpticalState, TimeBin};

/// Window width that background coefficients in [`ConverterParams`] refer to.
pub const NOISE_REFERENCE_WINDOW_S: f64 = 200e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    /// Mean photon number per input time bin.
    pub alpha2: f64,
    /// Transmittance before the converter, including waveguide coupling.
    pub input_transmittance: f64,
    /// Overall transmittance after the converter for the visible band,
    /// detector efficiency included.
    pub visible_transmittance: f64,
    pub telecom_transmittance: f64,
    /// TDC gate frequency, Hz.
    pub clock_hz: f64,
    /// Laser repetition rate, Hz; sets the gate period of the TDC axis.
    pub rep_rate_hz: f64,
    /// Time-bin separation, s.
    pub delay_s: f64,
    /// Post-selection window width, s.
    pub window_s: f64,
    pub pump_power_mw: f64,
    /// Scan phase on the late bin, radians.
    pub scan_phase: f64,
    /// Interferometer bias; fringes follow `1 + cos(delta - offset)`.
    pub fringe_offset: f64,
    /// Mode-overlap factor at recombination, in [0, 1].
    pub intrinsic_visibility: f64,
    /// Fraction of the pulse energy sent to the early bin.
    pub split_ratio: f64,
    /// Detector dark counts in one window, counts/s.
    pub dark_count_cps: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            alpha2: 0.1,
            input_transmittance: 0.3,
            visible_transmittance: 0.1,
            telecom_transmittance: 0.15,
            clock_hz: 1e6,
            rep_rate_hz: 82e6,
            delay_s: 600e-12,
            window_s: 200e-12,
            pump_power_mw: 165.0,
            scan_phase: 0.0,
            fringe_offset: 0.0,
            intrinsic_visibility: 1.0,
            split_ratio: 0.5,
            dark_count_cps: 0.0,
        }
    }
}

impl CircuitConfig {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("alpha2", self.alpha2)?;
        check_unit_interval("input_transmittance", self.input_transmittance)?;
        check_unit_interval("visible_transmittance", self.visible_transmittance)?;
        check_unit_interval("telecom_transmittance", self.telecom_transmittance)?;
        check_unit_interval("intrinsic_visibility", self.intrinsic_visibility)?;
        check_unit_interval("split_ratio", self.split_ratio)?;
        check_non_negative("pump_power_mw", self.pump_power_mw)?;
        check_non_negative("dark_count_cps", self.dark_count_cps)?;
        if !(self.clock_hz > 0.0 && self.rep_rate_hz > 0.0) {
            return Err(Error::Domain {
                name: "clock_hz",
                value: self.clock_hz.min(self.rep_rate_hz),
                domain: "(0, inf)",
            });
        }
        if !(self.window_s > 0.0
            && self.window_s < self.delay_s
            && self.delay_s < self.gate_period_s())
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 < window ({:e} s) < delay ({:e} s) < 1/rep_rate ({:e} s)",
                self.window_s,
                self.delay_s,
                self.gate_period_s()
            )));
        }
        if !(self.scan_phase.is_finite() && self.fringe_offset.is_finite()) {
            return Err(Error::InvalidArgument("phases must be finite".into()));
        }
        Ok(())
    }

    /// Length of the TDC time axis, one laser period.
    pub fn gate_period_s(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    pub fn band_transmittance(&self, band: Band) -> f64 {
        match band {
            Band::Visible => self.visible_transmittance,
            Band::Telecom => self.telecom_transmittance,
        }
    }

    /// End-to-end transmittance `T_in * T(P) * T_V` (or `R(P) * T_T`).
    pub fn overall_transmittance(&self, params: &ConverterParams, band: Band) -> Result<f64> {
        let e = params.efficiency(self.pump_power_mw)?;
        let split = match band {
            Band::Visible => e.transmission,
            Band::Telecom => e.conversion,
        };
        Ok(self.input_transmittance * split * self.band_transmittance(band))
    }

    pub fn with_scan_phase(&self, scan_phase: f64) -> Self {
        Self {
            scan_phase,
            ..self.clone()
        }
    }

    pub fn with_pump(&self, pump_power_mw: f64) -> Self {
        Self {
            pump_power_mw,
            ..self.clone()
        }
    }

    pub fn with_alpha2(&self, alpha2: f64) -> Self {
        Self {
            alpha2,
            ..self.clone()
        }
    }
}

/// Expected rates at one detector, counts/s. `background` is the rate in a
/// single post-selection window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectorRates {
    pub early: f64,
    pub middle: f64,
    pub late: f64,
    pub background: f64,
}

impl DetectorRates {
    /// Signal plus background in the middle window.
    pub fn middle_total(&self) -> f64 {
        self.middle + self.background
    }

    /// Signal summed over the three peaks.
    pub fn signal_total(&self) -> f64 {
        self.early + self.middle + self.late
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakRates {
    pub visible: DetectorRates,
    pub telecom: DetectorRates,
}

impl PeakRates {
    pub fn band(&self, band: Band) -> &DetectorRates {
        match band {
            Band::Visible => &self.visible,
            Band::Telecom => &self.telecom,
        }
    }
}

/// Input pulse pair: both visible bins carry `sqrt(alpha2)`, the late one with
/// phase `delta`.
pub fn build_input(alpha2: f64, delta: f64) -> Result<OpticalState> {
    build_input_split(alpha2, delta, 0.5)
}

/// As [`build_input`] with an unbalanced first splitter; `split` is the
/// energy fraction in the early bin and the per-bin mean stays `alpha2` at
/// balance.
pub fn build_input_split(alpha2: f64, delta: f64, split: f64) -> Result<OpticalState> {
    check_non_negative("alpha2", alpha2)?;
    check_unit_interval("split_ratio", split)?;
    let early = ModeLabel::new(Band::Visible, TimeBin::Early);
    let late = ModeLabel::new(Band::Visible, TimeBin::Late);
    let amp_early = (2.0 * split * alpha2).sqrt();
    let amp_late = (2.0 * (1.0 - split) * alpha2).sqrt();
    Ok(OpticalState::vacuum()
        .with_amplitude(early, amp_early.into())
        .with_amplitude(late, amp_late.into())
        .apply_phase(late, delta))
}

/// The state arriving at the second interferometers, after input loss,
/// conversion, and the per-band output transmittances.
pub fn detected_state(config: &CircuitConfig, params: &ConverterParams) -> Result<OpticalState> {
    let mut state = build_input_split(config.alpha2, config.scan_phase, config.split_ratio)?;
    for bin in TimeBin::ALL {
        state = state.apply_loss(
            ModeLabel::new(Band::Visible, bin),
            config.input_transmittance,
        )?;
    }
    state = params.apply_conversion(&state, config.pump_power_mw)?;
    for band in Band::ALL {
        for bin in TimeBin::ALL {
            state = state.apply_loss(ModeLabel::new(band, bin), config.band_transmittance(band))?;
        }
    }
    Ok(state)
}

/// Expected peak and background rates for both detectors.
pub fn propagate(config: &CircuitConfig, params: &ConverterParams) -> Result<PeakRates> {
    config.validate()?;
    params.validate()?;
    let state = detected_state(config, params)?;
    let window_scale = config.window_s / NOISE_REFERENCE_WINDOW_S;
    let rates = |band: Band| {
        let a_early = state.amplitude(ModeLabel::new(band, TimeBin::Early));
        let a_late = state.amplitude(ModeLabel::new(band, TimeBin::Late));
        // Each path of the second interferometer and the +45 degree projection
        // each pass half the intensity: amplitude factor 1/2 per path.
        let bias = num_complex::Complex64::from_polar(1.0, -config.fringe_offset);
        let cross = (a_early.conj() * a_late * bias).re;
        let middle =
            (a_early.norm_sqr() + a_late.norm_sqr() + 2.0 * config.intrinsic_visibility * cross)
                / 4.0;
        let background = (params.background_rate(band, config.pump_power_mw, config.alpha2)
            + config.dark_count_cps)
            * window_scale;
        DetectorRates {
            early: config.clock_hz * a_early.norm_sqr() / 4.0,
            middle: config.clock_hz * middle.max(0.0),
            late: config.clock_hz * a_late.norm_sqr() / 4.0,
            background,
        }
    };
    Ok(PeakRates {
        visible: rates(Band::Visible),
        telecom: rates(Band::Telecom),
    })
}

pub fn fringe_scan(
    config: &CircuitConfig,
    params: &ConverterParams,
    phases: &[f64],
) -> Result<Vec<(f64, PeakRates)>> {
    if phases.is_empty() {
        return Err(Error::InvalidArgument(
            "fringe scan needs at least one phase".into(),
        ));
    }
    phases
        .iter()
        .map(|&delta| propagate(&config.with_scan_phase(delta), params).map(|r| (delta, r)))
        .collect()
}

/// `n` equally spaced phases over one period, starting at 0.
pub fn scan_phases(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionPoint {
    pub pump_mw: f64,
    /// Phase-averaged signal rate summed over the three peaks, counts/s.
    pub visible_rate: f64,
    pub telecom_rate: f64,
}

/// Phase-independent detected signal rates versus pump power,
/// `C(P) = f * alpha2 * T_in * T(P) * T_V` and its telecom counterpart.
pub fn conversion_curve(
    config: &CircuitConfig,
    params: &ConverterParams,
    pumps: &[f64],
) -> Result<Vec<ConversionPoint>> {
    config.validate()?;
    params.validate()?;
    pumps
        .iter()
        .map(|&pump| {
            let state = detected_state(&config.with_pump(pump), params)?;
            // Early + late + fringe-averaged middle = half the two-bin total.
            let rate = |band: Band| {
                let total: f64 = TimeBin::ALL
                    .into_iter()
                    .map(|bin| state.mean_photon_number(ModeLabel::new(band, bin)))
                    .sum();
                config.clock_hz * total / 2.0
            };
            Ok(ConversionPoint {
                pump_mw: pump,
                visible_rate: rate(Band::Visible),
                telecom_rate: rate(Band::Telecom),
            })
        })
        .collect()
}
