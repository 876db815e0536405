//! Pump-driven frequency-domain beamsplitter between the visible and telecom
//! bands, and the pump-induced background models.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, Error, Result};
use crate::mode::{Band, ModeLabel, OpticalState, TimeBin};

/// Signal-dependent background: `constant + per_alpha2 * |alpha|^2`, counts/s
/// in one post-selection window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalLeak {
    pub constant_cps: f64,
    pub per_alpha2_cps: f64,
}

impl SignalLeak {
    pub fn rate(&self, alpha2: f64) -> f64 {
        self.constant_cps + self.per_alpha2_cps * alpha2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    /// Saturation level `A` of the conversion efficiency, in (0, 1].
    pub saturation: f64,
    /// Pump coupling `eta`, 1/mW.
    pub coupling_per_mw: f64,
    /// Pump phase, radians.
    pub pump_phase: f64,
    /// Telecom Raman background slope, counts/s per mW.
    pub telecom_noise_slope: f64,
    /// Visible background polynomial in pump power; entry `k` multiplies
    /// `P^(k+1)` (counts/s per mW^(k+1)).
    pub visible_noise_coeffs: Vec<f64>,
    pub visible_leak: SignalLeak,
    pub telecom_leak: SignalLeak,
}

impl Default for ConverterParams {
    fn default() -> Self {
        Self {
            saturation: 0.94,
            coupling_per_mw: 0.0044,
            pump_phase: 0.0,
            telecom_noise_slope: 0.0,
            visible_noise_coeffs: Vec::new(),
            visible_leak: SignalLeak::default(),
            telecom_leak: SignalLeak::default(),
        }
    }
}

/// Unconverted fraction `T` and conversion efficiency `R = 1 - T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiency {
    pub transmission: f64,
    pub conversion: f64,
}

impl ConverterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.saturation > 0.0 && self.saturation <= 1.0) {
            return Err(Error::Domain {
                name: "saturation",
                value: self.saturation,
                domain: "(0, 1]",
            });
        }
        if !(self.coupling_per_mw > 0.0 && self.coupling_per_mw.is_finite()) {
            return Err(Error::Domain {
                name: "coupling_per_mw",
                value: self.coupling_per_mw,
                domain: "(0, inf)",
            });
        }
        if !self.pump_phase.is_finite() {
            return Err(Error::Domain {
                name: "pump_phase",
                value: self.pump_phase,
                domain: "finite reals",
            });
        }
        check_non_negative("telecom_noise_slope", self.telecom_noise_slope)?;
        for &c in &self.visible_noise_coeffs {
            check_non_negative("visible_noise_coeff", c)?;
        }
        for leak in [self.visible_leak, self.telecom_leak] {
            check_non_negative("leak_constant_cps", leak.constant_cps)?;
            check_non_negative("leak_per_alpha2_cps", leak.per_alpha2_cps)?;
        }
        Ok(())
    }

    /// `sqrt(eta * P)`, the effective interaction angle.
    fn angle(&self, pump_mw: f64) -> Result<f64> {
        check_non_negative("pump_power_mw", pump_mw)?;
        Ok((self.coupling_per_mw * pump_mw).sqrt())
    }

    /// `R(P) = A sin^2(sqrt(eta P))` and `T(P) = 1 - R(P)`.
    pub fn efficiency(&self, pump_mw: f64) -> Result<Efficiency> {
        let s = self.angle(pump_mw)?.sin();
        let conversion = self.saturation * s * s;
        Ok(Efficiency {
            transmission: 1.0 - conversion,
            conversion,
        })
    }

    /// Pump power of the first efficiency maximum, `(pi/2)^2 / eta`.
    pub fn peak_pump_mw(&self) -> f64 {
        std::f64::consts::FRAC_PI_2.powi(2) / self.coupling_per_mw
    }

    /// 2x2 amplitude matrix `[[vis<-vis, vis<-tel], [tel<-vis, tel<-tel]]`.
    ///
    /// The visible column is `(sqrt(1 - A sin^2), e^{-i phi} sqrt(A) sin)`;
    /// the telecom column is chosen so the matrix is unitary.
    pub fn conversion_matrix(&self, pump_mw: f64) -> Result<[[Complex64; 2]; 2]> {
        let theta = self.angle(pump_mw)?;
        let converted = self.saturation.sqrt() * theta.sin();
        let unconverted = (1.0 - converted * converted).max(0.0).sqrt();
        let phase = Complex64::from_polar(1.0, -self.pump_phase);
        let u = Complex64::new(unconverted, 0.0);
        Ok([[u, -phase.conj() * converted], [phase * converted, u]])
    }

    /// Applies the converter to both time bins independently.
    pub fn apply_conversion(&self, state: &OpticalState, pump_mw: f64) -> Result<OpticalState> {
        let m = self.conversion_matrix(pump_mw)?;
        let mut next = state.clone();
        for bin in TimeBin::ALL {
            let vis = ModeLabel::new(Band::Visible, bin);
            let tel = ModeLabel::new(Band::Telecom, bin);
            let (v, t) = (state.amplitude(vis), state.amplitude(tel));
            next = next
                .with_amplitude(vis, m[0][0] * v + m[0][1] * t)
                .with_amplitude(tel, m[1][0] * v + m[1][1] * t);
        }
        Ok(next)
    }

    /// Raman background in the telecom band, linear in pump power.
    pub fn noise_rate_telecom(&self, pump_mw: f64) -> f64 {
        self.telecom_noise_slope * pump_mw
    }

    /// Pump-induced background in the visible band, a polynomial in `P`
    /// without a constant term.
    pub fn noise_rate_visible(&self, pump_mw: f64) -> f64 {
        self.visible_noise_coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| (acc + c) * pump_mw)
    }

    pub fn noise_rate_signal_leak(&self, band: Band, alpha2: f64) -> f64 {
        match band {
            Band::Visible => self.visible_leak.rate(alpha2),
            Band::Telecom => self.telecom_leak.rate(alpha2),
        }
    }

    /// Total background `d` in one post-selection window, counts/s.
    pub fn background_rate(&self, band: Band, pump_mw: f64, alpha2: f64) -> f64 {
        let pump = match band {
            Band::Visible => self.noise_rate_visible(pump_mw),
            Band::Telecom => self.noise_rate_telecom(pump_mw),
        };
        pump + self.noise_rate_signal_leak(band, alpha2)
    }
}
