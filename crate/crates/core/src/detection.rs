//! Gated photon counting: Poisson sampling of expected rates, TDC-style
//! histograms, window post-selection and visibility estimation.
//!
//! # Seeds
//!
//! Every random draw comes from a [`SeedStream`]. A stream holds one `u64`;
//! `child(i)` derives the seed of sub-stream `i` as
//! `splitmix64(seed ^ splitmix64(i + 0x9E37_79B9_7F4A_7C15))`, and `rng()`
//! returns `ChaCha8Rng::seed_from_u64(seed)`. Scan points and sweep points
//! each take their own child, so results do not depend on evaluation order
//! or thread count.

use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitConfig, DetectorRates, PeakRates};
use crate::error::{check_non_negative, Error, Result};
use crate::mode::Band;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    pub fn child(&self, index: u64) -> Self {
        Self(splitmix64(
            self.0 ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)),
        ))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// One Poisson draw with the given mean. `rand_distr` uses multiplication
/// (inversion) for small means and transformed rejection for large ones.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<u64> {
    check_non_negative("poisson_mean", mean)?;
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Counts accumulated over `duration_s` at `rate` counts/s.
pub fn sample_counts(rate: f64, duration_s: f64, seed: u64) -> Result<u64> {
    sample_counts_with(&mut SeedStream::new(seed).rng(), rate, duration_s)
}

pub fn sample_counts_with<R: Rng + ?Sized>(rng: &mut R, rate: f64, duration_s: f64) -> Result<u64> {
    check_non_negative("rate", rate)?;
    if !(duration_s > 0.0) {
        return Err(Error::Domain {
            name: "duration_s",
            value: duration_s,
            domain: "(0, inf)",
        });
    }
    sample_poisson(rng, rate * duration_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Peak {
    Early,
    Middle,
    Late,
    /// Background spread over the whole gate period.
    Background,
}

impl Peak {
    pub const ALL: [Peak; 4] = [Peak::Early, Peak::Middle, Peak::Late, Peak::Background];

    pub fn as_str(self) -> &'static str {
        match self {
            Peak::Early => "early",
            Peak::Middle => "middle",
            Peak::Late => "late",
            Peak::Background => "background",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Peak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub detector: Band,
    pub peak: Peak,
    pub duration_s: f64,
    pub counts: u64,
}

/// Arrival-time layout of one gate: peaks at 0, `delay` and `2 delay`; the
/// axis spans one laser period centred on the middle peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAxis {
    pub delay_s: f64,
    pub period_s: f64,
}

impl TimeAxis {
    pub fn from_config(config: &CircuitConfig) -> Self {
        Self {
            delay_s: config.delay_s,
            period_s: config.gate_period_s(),
        }
    }

    pub fn peak_time(&self, peak: Peak) -> Option<f64> {
        match peak {
            Peak::Early => Some(0.0),
            Peak::Middle => Some(self.delay_s),
            Peak::Late => Some(2.0 * self.delay_s),
            Peak::Background => None,
        }
    }

    pub fn start(&self) -> f64 {
        self.delay_s - self.period_s / 2.0
    }

    pub fn end(&self) -> f64 {
        self.delay_s + self.period_s / 2.0
    }
}

/// Expected background counts over the whole gate given the in-window rate.
pub fn gate_background_mean(rates: &DetectorRates, config: &CircuitConfig, duration_s: f64) -> f64 {
    rates.background * duration_s * config.gate_period_s() / config.window_s
}

/// Samples peak and background records for both detectors.
pub fn acquire<R: Rng + ?Sized>(
    rates: &PeakRates,
    config: &CircuitConfig,
    duration_s: f64,
    rng: &mut R,
) -> Result<Vec<CountRecord>> {
    let mut records = Vec::with_capacity(8);
    for band in Band::ALL {
        let r = rates.band(band);
        for peak in Peak::ALL {
            let counts = match peak {
                Peak::Early => sample_counts_with(rng, r.early, duration_s)?,
                Peak::Middle => sample_counts_with(rng, r.middle, duration_s)?,
                Peak::Late => sample_counts_with(rng, r.late, duration_s)?,
                Peak::Background => {
                    sample_poisson(rng, gate_background_mean(r, config, duration_s))?
                }
            };
            records.push(CountRecord {
                detector: band,
                peak,
                duration_s,
                counts,
            });
        }
    }
    Ok(records)
}

/// Counts on the gate-relative time axis. Bin edges sit on the middle peak
/// plus integer multiples of the bin width; the two outermost bins are
/// clipped to the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    axis: TimeAxis,
    bin_width_s: f64,
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn empty(axis: TimeAxis, bin_width_s: f64) -> Result<Self> {
        if !(bin_width_s > 0.0) {
            return Err(Error::Domain {
                name: "bin_width_s",
                value: bin_width_s,
                domain: "(0, inf)",
            });
        }
        let (start, end, anchor) = (axis.start(), axis.end(), axis.delay_s);
        let k_lo = ((start - anchor) / bin_width_s).floor() as i64 + 1;
        let k_hi = ((end - anchor) / bin_width_s).ceil() as i64 - 1;
        let mut edges = vec![start];
        edges.extend(
            (k_lo..=k_hi)
                .map(|k| anchor + k as f64 * bin_width_s)
                .filter(|&e| e > start + 1e-9 * bin_width_s && e < end - 1e-9 * bin_width_s),
        );
        edges.push(end);
        let counts = vec![0; edges.len() - 1];
        Ok(Self {
            axis,
            bin_width_s,
            edges,
            counts,
        })
    }

    pub fn axis(&self) -> TimeAxis {
        self.axis
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lo, hi, counts)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.counts)
            .map(|(e, &c)| (e[0], e[1], c))
    }

    fn bin_of(&self, t: f64) -> Option<usize> {
        if t < self.edges[0] || t >= *self.edges.last().unwrap() {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= t) - 1)
    }

    /// Sum of bins lying entirely inside `[lo, hi]`.
    pub fn sum_within(&self, lo: f64, hi: f64) -> u64 {
        let eps = 1e-6 * self.bin_width_s;
        self.bins()
            .filter(|&(a, b, _)| a >= lo - eps && b <= hi + eps)
            .map(|(_, _, c)| c)
            .sum()
    }

    /// Total width of bins lying entirely inside `[lo, hi]`.
    fn width_within(&self, lo: f64, hi: f64) -> f64 {
        let eps = 1e-6 * self.bin_width_s;
        self.bins()
            .filter(|&(a, b, _)| a >= lo - eps && b <= hi + eps)
            .map(|(a, b, _)| b - a)
            .sum()
    }
}

/// Bins peak records at their arrival times and spreads background records
/// uniformly over the axis (multinomial by bin width).
pub fn histogram<R: Rng + ?Sized>(
    records: &[CountRecord],
    axis: TimeAxis,
    bin_width_s: f64,
    rng: &mut R,
) -> Result<Histogram> {
    let mut hist = Histogram::empty(axis, bin_width_s)?;
    for rec in records {
        match axis.peak_time(rec.peak) {
            Some(t) => {
                let bin = hist.bin_of(t).ok_or_else(|| {
                    Error::InvalidArgument(format!("peak at {t:e} s is off the axis"))
                })?;
                hist.counts[bin] += rec.counts;
            }
            None => {
                let mut remaining = rec.counts;
                let mut width_left = axis.period_s;
                for (i, w) in hist.edges.windows(2).map(|e| e[1] - e[0]).enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let p = (w / width_left).clamp(0.0, 1.0);
                    let k = if p >= 1.0 {
                        remaining
                    } else {
                        Binomial::new(remaining, p)
                            .map_err(|e| Error::InvalidArgument(e.to_string()))?
                            .sample(rng)
                    };
                    hist.counts[i] += k;
                    remaining -= k;
                    width_left -= w;
                }
                // Rounding in the width bookkeeping can leave a remainder.
                if remaining > 0 {
                    *hist.counts.last_mut().unwrap() += remaining;
                }
            }
        }
    }
    Ok(hist)
}

/// Counts in a window of width `window_s` centred on `center_s`.
pub fn postselect_window(hist: &Histogram, center_s: f64, window_s: f64) -> Result<u64> {
    if !(window_s >= 0.0 && window_s <= hist.axis.period_s * (1.0 + 1e-12)) {
        return Err(Error::Domain {
            name: "window_s",
            value: window_s,
            domain: "[0, gate period]",
        });
    }
    Ok(hist.sum_within(center_s - window_s / 2.0, center_s + window_s / 2.0))
}

/// Counts in the window around the middle peak. Windows wider than the peak
/// spacing are rejected.
pub fn postselect_middle(hist: &Histogram, window_s: f64) -> Result<u64> {
    if window_s > hist.axis.delay_s {
        return Err(Error::InvalidArgument(format!(
            "window {window_s:e} s exceeds the peak spacing {:e} s",
            hist.axis.delay_s
        )));
    }
    postselect_window(hist, hist.axis.delay_s, window_s)
}

/// Background per window estimated from bins at least one window away from
/// all three peaks.
pub fn estimate_background(hist: &Histogram, window_s: f64) -> Result<f64> {
    let axis = hist.axis;
    let lo_excl = -window_s;
    let hi_excl = 2.0 * axis.delay_s + window_s;
    let counts = hist.sum_within(axis.start(), lo_excl) + hist.sum_within(hi_excl, axis.end());
    let width = hist.width_within(axis.start(), lo_excl) + hist.width_within(hi_excl, axis.end());
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(
            "no off-peak region on the time axis".into(),
        ));
    }
    Ok(counts as f64 * window_s / width)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityEstimate {
    pub visibility: f64,
    pub sigma: f64,
    pub n_max: f64,
    pub n_min: f64,
}

/// `V = (N_max - N_min) / (N_max + N_min)` with the Poisson standard
/// deviation `2 sqrt(N_max N_min / (N_max + N_min)^3)`.
pub fn visibility_from_extremes(n_max: f64, n_min: f64) -> Result<VisibilityEstimate> {
    check_non_negative("n_max", n_max)?;
    check_non_negative("n_min", n_min)?;
    let sum = n_max + n_min;
    if sum <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(VisibilityEstimate {
        visibility: (n_max - n_min) / sum,
        sigma: 2.0 * (n_max * n_min / sum.powi(3)).sqrt(),
        n_max,
        n_min,
    })
}

/// Grid estimator: extremes taken over the measured scan points.
pub fn estimate_visibility(scan: &[(f64, f64)]) -> Result<VisibilityEstimate> {
    if scan.len() < 2 {
        return Err(Error::InvalidArgument(
            "visibility needs at least two scan points".into(),
        ));
    }
    let n_max = scan.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let n_min = scan.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    visibility_from_extremes(n_max, n_min)
}

/// Sinusoid fitted to a fringe scan, `N(delta) = mean (1 + V cos(delta - phase))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub visibility: f64,
    pub sigma: f64,
    pub mean: f64,
    pub phase: f64,
}

/// Fit-based estimator. Weighted linear least squares on
/// `a + b cos(delta) + c sin(delta)` with Poisson weights `1 / max(N, 1)`;
/// `V = sqrt(b^2 + c^2) / a` with delta-method uncertainty.
pub fn estimate_visibility_fit(scan: &[(f64, f64)]) -> Result<FringeFit> {
    if scan.len() < 3 {
        return Err(Error::Underdetermined {
            points: scan.len(),
            params: 3,
        });
    }
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for &(delta, n) in scan {
        let x = Vector3::new(1.0, delta.cos(), delta.sin());
        let w = 1.0 / n.max(1.0);
        normal += w * x * x.transpose();
        rhs += w * n * x;
    }
    let cov = normal
        .try_inverse()
        .ok_or_else(|| Error::DegenerateData("scan phases do not span a full fringe".into()))?;
    let coef = cov * rhs;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if a <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let amp = b.hypot(c);
    let visibility = amp / a;
    let grad = if amp > 0.0 {
        Vector3::new(-amp / (a * a), b / (amp * a), c / (amp * a))
    } else {
        Vector3::new(0.0, 0.0, 0.0)
    };
    let sigma = (grad.transpose() * cov * grad)[0].max(0.0).sqrt();
    Ok(FringeFit {
        visibility,
        sigma,
        mean: a,
        phase: c.atan2(b),
    })
}
