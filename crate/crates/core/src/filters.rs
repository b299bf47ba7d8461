//! Spectral clean-up of the raw pulse: amplitude-selective weighting,
//! color-distortion weighting, a pass band, then a moving average.
//!
//! Both spectral weightings are derived from the spectrum of the mean
//! normalized RGB trace that produced the pulse, so the pulse and trace
//! must cover the same samples.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::pos::{mean, PulseSignal, RgbTrace};

/// Default blood-volume pulse color direction in normalized RGB.
pub const DEFAULT_PULSE_DIRECTION: [f64; 3] = [0.33, 0.77, 0.53];

pub fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|c| c / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Largest relative red-channel amplitude treated as pulsatile.
    pub asf_delta: f64,
    /// Unit vector; normalized on validation if given unnormalized in a config file.
    pub pulse_direction: [f64; 3],
    /// Pass band in Hz.
    pub band: (f64, f64),
    /// Moving-average length; `None` means `round(fps / 6)`.
    pub ma_points: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            asf_delta: 0.002,
            pulse_direction: normalize3(DEFAULT_PULSE_DIRECTION),
            band: (0.7, 4.0),
            ma_points: None,
        }
    }
}

impl FilterConfig {
    pub fn ma_points_for(&self, fps: f64) -> usize {
        self.ma_points.unwrap_or_else(|| ((fps / 6.0).round() as usize).max(1))
    }

    pub fn validate(&self, fps: f64) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi < fps / 2.0) {
            return Err(RppgError::Config(format!(
                "band ({lo}, {hi}) Hz must satisfy 0 < lo < hi < fps/2 = {}",
                fps / 2.0
            )));
        }
        if self.ma_points == Some(0) {
            return Err(RppgError::Config("ma_points must be at least 1".into()));
        }
        if !(self.asf_delta > 0.0) {
            return Err(RppgError::Config("asf_delta must be positive".into()));
        }
        let norm = self.pulse_direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(RppgError::Config(format!("pulse_direction must be a unit vector, norm is {norm}")));
        }
        Ok(())
    }
}

/// One-sided per-bin weights, `weights[k]` applying at `k * bin_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralWeights {
    pub weights: Vec<f64>,
    pub bin_hz: f64,
}

impl SpectralWeights {
    pub fn product(&self, other: &SpectralWeights) -> SpectralWeights {
        SpectralWeights {
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).collect(),
            bin_hz: self.bin_hz,
        }
    }

    /// Pass band mask on the same bins. DC is always blocked.
    pub fn band_mask(bins: usize, bin_hz: f64, (lo, hi): (f64, f64)) -> SpectralWeights {
        SpectralWeights {
            weights: (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if k > 0 && f >= lo && f <= hi {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect(),
            bin_hz,
        }
    }
}

/// One-sided spectrum (`N/2 + 1` bins) of the three color channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbSpectrum {
    pub channels: [Vec<Complex64>; 3],
    pub bin_hz: f64,
    /// Length of the transformed series.
    pub len: usize,
}

impl RgbSpectrum {
    pub fn from_colors(colors: &[[f64; 3]], fps: f64) -> RgbSpectrum {
        let n = colors.len();
        let mut channels: [Vec<Complex64>; 3] = Default::default();
        for (c, out) in channels.iter_mut().enumerate() {
            let full = fft_real(&colors.iter().map(|s| s[c]).collect::<Vec<_>>());
            *out = full[..n / 2 + 1].to_vec();
        }
        RgbSpectrum {
            channels,
            bin_hz: fps / n as f64,
            len: n,
        }
    }

    /// Spectrum of the trace after dividing each channel by its mean.
    pub fn normalized(trace: &RgbTrace) -> Result<RgbSpectrum> {
        let colors = trace.colors();
        if colors.is_empty() {
            return Err(RppgError::InsufficientData("empty trace".into()));
        }
        let n = colors.len() as f64;
        let mut means = [0.0; 3];
        for (c, m) in means.iter_mut().enumerate() {
            *m = colors.iter().map(|s| s[c]).sum::<f64>() / n;
            if !(*m > 0.0) {
                return Err(RppgError::DegenerateSpectrum(format!("channel {c} has non-positive mean")));
            }
        }
        let normed: Vec<[f64; 3]> = colors.iter().map(|s| [s[0] / means[0], s[1] / means[1], s[2] / means[2]]).collect();
        Ok(Self::from_colors(&normed, trace.fps))
    }

    pub fn bins(&self) -> usize {
        self.channels[0].len()
    }
}

pub(crate) fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spectrum);
    spectrum.into_iter().map(|c| c.re / n as f64).collect()
}

/// `y[i] = (1/M) * sum_{j<M} x[i + j]`, output length `len(x) - M + 1`.
pub fn moving_average(x: &[f64], points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(RppgError::Config("moving average needs at least 1 point".into()));
    }
    if x.len() < points {
        return Err(RppgError::InsufficientData(format!(
            "moving average of {points} points over {} samples",
            x.len()
        )));
    }
    let m = points as f64;
    let mut sum: f64 = x[..points].iter().sum();
    let mut out = Vec::with_capacity(x.len() - points + 1);
    out.push(sum / m);
    for i in points..x.len() {
        sum += x[i] - x[i - points];
        out.push(sum / m);
    }
    Ok(out)
}

/// Amplitude-selective weights: `min(1, delta / a_R(f))` with `a_R` the
/// DC-normalized red amplitude. DC gets weight 0.
pub fn asf_weights(spectrum: &RgbSpectrum, delta: f64) -> Result<SpectralWeights> {
    let red = &spectrum.channels[0];
    let dc = red.first().map_or(0.0, |c| c.norm());
    if dc == 0.0 {
        return Err(RppgError::DegenerateSpectrum("red channel has zero DC".into()));
    }
    let weights = red
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k == 0 {
                return 0.0;
            }
            let rel = c.norm() / dc;
            if rel <= delta {
                1.0
            } else {
                delta / rel
            }
        })
        .collect();
    Ok(SpectralWeights {
        weights,
        bin_hz: spectrum.bin_hz,
    })
}

/// Color-distortion weights: energy fraction of each bin's RGB vector along
/// the pulse direction. DC and empty bins get 0.
pub fn cdf_weights(spectrum: &RgbSpectrum, pulse_direction: [f64; 3]) -> SpectralWeights {
    let weights = (0..spectrum.bins())
        .map(|k| {
            if k == 0 {
                return 0.0;
            }
            let c = [spectrum.channels[0][k], spectrum.channels[1][k], spectrum.channels[2][k]];
            let energy: f64 = c.iter().map(Complex64::norm_sqr).sum();
            if energy == 0.0 {
                return 0.0;
            }
            let along: Complex64 = c.iter().zip(pulse_direction).map(|(c, u)| c * u).sum();
            (along.norm_sqr() / energy).clamp(0.0, 1.0)
        })
        .collect();
    SpectralWeights {
        weights,
        bin_hz: spectrum.bin_hz,
    }
}

/// Applies one-sided weights to a full spectrum, mirroring onto negative bins.
fn weight_spectrum(spectrum: &[Complex64], weights: &SpectralWeights) -> Vec<Complex64> {
    let n = spectrum.len();
    spectrum
        .iter()
        .enumerate()
        .map(|(k, c)| c * weights.weights[k.min(n - k)])
        .collect()
}

/// Intermediate signals of the filter chain, in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStages {
    pub asf: PulseSignal,
    pub cdf: PulseSignal,
    pub smoothed: PulseSignal,
    pub weights: SpectralWeights,
}

pub fn filter_stages(pulse: &PulseSignal, trace: &RgbTrace, cfg: &FilterConfig) -> Result<FilterStages> {
    if pulse.len() != trace.len() {
        return Err(RppgError::Alignment(format!(
            "pulse has {} samples, trace has {}",
            pulse.len(),
            trace.len()
        )));
    }
    if pulse.fps != trace.fps {
        return Err(RppgError::Alignment(format!(
            "pulse at {} fps, trace at {} fps",
            pulse.fps, trace.fps
        )));
    }
    cfg.validate(pulse.fps)?;
    let ma_points = cfg.ma_points_for(pulse.fps);
    if pulse.len() < ma_points.max(2) {
        return Err(RppgError::InsufficientData(format!(
            "{} samples cannot be filtered with a {ma_points}-point average",
            pulse.len()
        )));
    }

    let rgb = RgbSpectrum::normalized(trace)?;
    let band = SpectralWeights::band_mask(rgb.bins(), rgb.bin_hz, cfg.band);
    let asf = asf_weights(&rgb, cfg.asf_delta)?.product(&band);
    let combined = asf.product(&cdf_weights(&rgb, cfg.pulse_direction));

    let spectrum = fft_real(&pulse.values);
    let asf_values = ifft_real(weight_spectrum(&spectrum, &asf));
    let cdf_values = ifft_real(weight_spectrum(&spectrum, &combined));

    let mut smoothed = moving_average(&cdf_values, ma_points)?;
    let m = mean(&smoothed);
    smoothed.iter_mut().for_each(|v| *v -= m);
    // Each average is attributed to the center of its support.
    let t0 = pulse.t0 + (ma_points - 1) as f64 / 2.0 / pulse.fps;

    Ok(FilterStages {
        asf: PulseSignal::new(asf_values, pulse.fps, pulse.t0),
        cdf: PulseSignal::new(cdf_values, pulse.fps, pulse.t0),
        smoothed: PulseSignal::new(smoothed, pulse.fps, t0),
        weights: combined,
    })
}

/// Full chain: spectral weighting (ASF x CDF x band) then moving average.
pub fn apply_filter_chain(pulse: &PulseSignal, trace: &RgbTrace, cfg: &FilterConfig) -> Result<PulseSignal> {
    filter_stages(pulse, trace, cfg).map(|s| s.smoothed)
}
