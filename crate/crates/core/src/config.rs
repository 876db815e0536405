//! Flat key-value configuration documents.
//!
//! A configuration is a TOML file with one key per parameter and the unit in
//! the key name. User files are overlaid on the bundled calibration, so
//! they only need the keys they change. Unknown keys and wrong types are
//! errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::CircuitConfig;
use crate::converter::{ConverterParams, SignalLeak};
use crate::error::{Error, Result};

/// The checked-in default calibration.
pub const CALIBRATION_TOML: &str = include_str!("../data/calibration.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub alpha2: f64,
    pub clock_hz: f64,
    pub rep_rate_hz: f64,
    pub delay_ps: f64,
    pub window_ps: f64,
    pub fringe_offset_rad: f64,
    pub intrinsic_visibility: f64,
    pub split_ratio: f64,
    pub dark_count_cps: f64,
    pub input_transmittance: f64,
    pub visible_transmittance: f64,
    pub telecom_transmittance: f64,
    pub pump_power_mw: f64,
    pub saturation: f64,
    pub coupling_per_mw: f64,
    pub pump_phase_rad: f64,
    pub noise_visible_poly_cps: Vec<f64>,
    pub leak_visible_cps: f64,
    pub leak_visible_cps_per_alpha2: f64,
    pub noise_telecom_cps_per_mw: f64,
    pub leak_telecom_cps: f64,
    pub leak_telecom_cps_per_alpha2: f64,
    pub duration_s: f64,
    pub bin_width_ps: f64,
    pub fringe_points: usize,
    pub conversion_points: usize,
    pub power_points: usize,
    pub alpha_points: usize,
    pub pump_min_mw: f64,
    pub pump_max_mw: f64,
    pub alpha2_min: f64,
    pub alpha2_max: f64,
    pub noise_degree: usize,
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

impl ConfigDoc {
    pub fn calibration() -> Self {
        Self::from_overrides("").expect("bundled calibration is valid")
    }

    /// Overlays `overrides` (TOML text) on the bundled calibration.
    pub fn from_overrides(overrides: &str) -> Result<Self> {
        let mut merged = parse_table(CALIBRATION_TOML, "bundled calibration")?;
        let user = parse_table(overrides, "config")?;
        for (k, v) in user {
            if !merged.contains_key(&k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            merged.insert(k, v);
        }
        let doc: ConfigDoc = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_overrides(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.circuit()
            .validate()
            .and_then(|_| self.converter().validate())
            .map_err(|e| Error::Config(e.to_string()))?;
        if !(self.duration_s > 0.0) {
            return bad(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            ));
        }
        if !(self.bin_width_ps > 0.0) {
            return bad(format!(
                "bin_width_ps must be positive, got {}",
                self.bin_width_ps
            ));
        }
        if self.fringe_points < 3 {
            return bad("fringe_points must be at least 3".into());
        }
        for (name, n) in [
            ("conversion_points", self.conversion_points),
            ("power_points", self.power_points),
            ("alpha_points", self.alpha_points),
        ] {
            if n < 2 {
                return bad(format!("{name} must be at least 2"));
            }
        }
        if !(self.pump_min_mw >= 0.0 && self.pump_max_mw > self.pump_min_mw) {
            return bad("need 0 <= pump_min_mw < pump_max_mw".into());
        }
        if !(self.alpha2_min > 0.0 && self.alpha2_max > self.alpha2_min) {
            return bad("need 0 < alpha2_min < alpha2_max".into());
        }
        Ok(())
    }

    pub fn circuit(&self) -> CircuitConfig {
        CircuitConfig {
            alpha2: self.alpha2,
            input_transmittance: self.input_transmittance,
            visible_transmittance: self.visible_transmittance,
            telecom_transmittance: self.telecom_transmittance,
            clock_hz: self.clock_hz,
            rep_rate_hz: self.rep_rate_hz,
            delay_s: self.delay_ps * 1e-12,
            window_s: self.window_ps * 1e-12,
            pump_power_mw: self.pump_power_mw,
            scan_phase: 0.0,
            fringe_offset: self.fringe_offset_rad,
            intrinsic_visibility: self.intrinsic_visibility,
            split_ratio: self.split_ratio,
            dark_count_cps: self.dark_count_cps,
        }
    }

    pub fn converter(&self) -> ConverterParams {
        ConverterParams {
            saturation: self.saturation,
            coupling_per_mw: self.coupling_per_mw,
            pump_phase: self.pump_phase_rad,
            telecom_noise_slope: self.noise_telecom_cps_per_mw,
            visible_noise_coeffs: self.noise_visible_poly_cps.clone(),
            visible_leak: SignalLeak {
                constant_cps: self.leak_visible_cps,
                per_alpha2_cps: self.leak_visible_cps_per_alpha2,
            },
            telecom_leak: SignalLeak {
                constant_cps: self.leak_telecom_cps,
                per_alpha2_cps: self.leak_telecom_cps_per_alpha2,
            },
        }
    }

    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_ps * 1e-12
    }

    /// Evenly spaced pump powers over `[pump_min_mw, pump_max_mw]`.
    pub fn pump_grid(&self, n: usize) -> Vec<f64> {
        linspace(self.pump_min_mw, self.pump_max_mw, n)
    }

    /// Log-spaced mean photon numbers over `[alpha2_min, alpha2_max]`.
    pub fn alpha2_grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.alpha2_min.log10(), self.alpha2_max.log10());
        linspace(lo, hi, self.alpha_points)
            .into_iter()
            .map(|e| 10f64.powf(e))
            .collect()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
