//! Multimode coherent light as complex amplitudes over labelled modes.
//!
//! Every input in this crate is a weak coherent pulse, so a state is fully
//! described by one complex amplitude per mode and the linear-optics
//! primitives act on those amplitudes directly. The mean photon number of a
//! mode is the squared magnitude of its amplitude.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};

/// Tolerance for single-step algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for quantities accumulated over many operations.
pub const ACCUMULATED_TOL: f64 = 1e-9;

/// Wavelength band. The pump is classical and never appears as a mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// Signal band, nominally 780 nm.
    Visible,
    /// Converted band, nominally 1522 nm.
    Telecom,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Visible, Band::Telecom];

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Visible => "visible",
            Band::Telecom => "telecom",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBin {
    Early,
    Late,
}

impl TimeBin {
    pub const ALL: [TimeBin; 2] = [TimeBin::Early, TimeBin::Late];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub band: Band,
    pub time_bin: TimeBin,
}

impl ModeLabel {
    pub const fn new(band: Band, time_bin: TimeBin) -> Self {
        Self { band, time_bin }
    }

    /// The four modes, in label order.
    pub fn all() -> impl Iterator<Item = ModeLabel> {
        Band::ALL.into_iter().flat_map(|band| {
            TimeBin::ALL
                .into_iter()
                .map(move |bin| ModeLabel::new(band, bin))
        })
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = match self.time_bin {
            TimeBin::Early => "early",
            TimeBin::Late => "late",
        };
        write!(f, "{}/{}", self.band, bin)
    }
}

/// Coherent amplitudes indexed by mode. Absent modes are vacuum.
///
/// Operations take `&self` and return a new state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpticalState {
    amplitudes: BTreeMap<ModeLabel, Complex64>,
}

impl OpticalState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn with_amplitude(mut self, mode: ModeLabel, amplitude: Complex64) -> Self {
        self.set(mode, amplitude);
        self
    }

    fn set(&mut self, mode: ModeLabel, amplitude: Complex64) {
        if amplitude == Complex64::new(0.0, 0.0) {
            self.amplitudes.remove(&mode);
        } else {
            self.amplitudes.insert(mode, amplitude);
        }
    }

    pub fn amplitude(&self, mode: ModeLabel) -> Complex64 {
        self.amplitudes.get(&mode).copied().unwrap_or_default()
    }

    /// Mean photon number `|amp|^2` of one mode.
    pub fn mean_photon_number(&self, mode: ModeLabel) -> f64 {
        self.amplitude(mode).norm_sqr()
    }

    /// Sum of mean photon numbers over all modes.
    pub fn total_mean_photon_number(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn modes(&self) -> impl Iterator<Item = (ModeLabel, Complex64)> + '_ {
        self.amplitudes.iter().map(|(m, a)| (*m, *a))
    }

    /// Two-mode beamsplitter with reflectance `r` and phase `phi`:
    ///
    /// ```text
    /// b' = e^{-i phi} sqrt(r) a + sqrt(1-r) b
    /// a' = sqrt(1-r) a - e^{+i phi} sqrt(r) b
    /// ```
    pub fn apply_beamsplitter(&self, a: ModeLabel, b: ModeLabel, r: f64, phi: f64) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidArgument(format!(
                "beamsplitter needs two distinct modes, got {a} twice"
            )));
        }
        check_unit_interval("reflectance", r)?;
        let (amp_a, amp_b) = (self.amplitude(a), self.amplitude(b));
        let s = r.sqrt();
        let c = (1.0 - r).sqrt();
        let out_b = Complex64::from_polar(s, -phi) * amp_a + c * amp_b;
        let out_a = c * amp_a - Complex64::from_polar(s, phi) * amp_b;
        let mut next = self.clone();
        next.set(a, out_a);
        next.set(b, out_b);
        Ok(next)
    }

    /// Phase shift `amp -> e^{i delta} amp` on one mode.
    pub fn apply_phase(&self, mode: ModeLabel, delta: f64) -> Self {
        let mut next = self.clone();
        next.set(
            mode,
            self.amplitude(mode) * Complex64::from_polar(1.0, delta),
        );
        next
    }

    /// Loss with transmittance `t`; the amplitude scales by `sqrt(t)`.
    pub fn apply_loss(&self, mode: ModeLabel, t: f64) -> Result<Self> {
        check_unit_interval("transmittance", t)?;
        let mut next = self.clone();
        next.set(mode, self.amplitude(mode) * t.sqrt());
        Ok(next)
    }

    /// Largest amplitude difference over all modes.
    pub fn max_abs_diff(&self, other: &OpticalState) -> f64 {
        ModeLabel::all()
            .map(|m| (self.amplitude(m) - other.amplitude(m)).norm())
            .fold(0.0, f64::max)
    }
}
