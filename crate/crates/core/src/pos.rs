//! Plane-orthogonal-to-skin pulse extraction.
//!
//! Each window of the RGB trace is divided by its per-channel mean, then
//! projected onto the plane orthogonal to the skin tone with the fixed
//! matrix `[[0, 1, -1], [-2, 1, 1]]`. The two projected signals are
//! combined with a ratio of their standard deviations so that residual
//! distortions in one cancel against the other. Windows are evaluated at
//! every start offset and overlap-added.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::roi::{Region, RgbSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgbTrace {
    pub samples: Vec<RgbSample>,
    pub fps: f64,
    /// Sample indices at which the ROI region differs from the previous sample.
    pub region_switches: Vec<usize>,
}

impl RgbTrace {
    pub fn new(samples: Vec<RgbSample>, fps: f64) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(RppgError::Config(format!("fps must be positive, got {fps}")));
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(RppgError::Format(format!(
                    "trace timestamps not strictly increasing at sample {}",
                    i + 1
                )));
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if s.rgb().iter().any(|c| !c.is_finite() || !(0.0..=255.0).contains(c)) {
                return Err(RppgError::Format(format!("sample {i} has a channel outside [0, 255]")));
            }
        }
        let region_switches = samples
            .windows(2)
            .enumerate()
            .filter(|(_, pair)| pair[0].region != pair[1].region)
            .map(|(i, _)| i + 1)
            .collect();
        Ok(Self {
            samples,
            fps,
            region_switches,
        })
    }

    /// Builds a trace from bare colors sampled at `i / fps`.
    pub fn from_colors(colors: &[[f64; 3]], fps: f64, region: Region) -> Result<Self> {
        let samples = colors
            .iter()
            .enumerate()
            .map(|(i, c)| RgbSample {
                timestamp: i as f64 / fps,
                r: c[0],
                g: c[1],
                b: c[2],
                region,
            })
            .collect();
        Self::new(samples, fps)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn colors(&self) -> Vec<[f64; 3]> {
        self.samples.iter().map(RgbSample::rgb).collect()
    }

    pub fn t0(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.timestamp)
    }

    /// Start offsets of windows of `window_len` that contain a region switch
    /// strictly inside them.
    pub fn straddling_windows(&self, window_len: usize) -> Vec<usize> {
        if window_len == 0 || self.len() < window_len {
            return Vec::new();
        }
        (0..=self.len() - window_len)
            .filter(|&start| self.region_switches.iter().any(|&s| s > start && s < start + window_len))
            .collect()
    }
}

/// Unitless pulse waveform sampled at the frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSignal {
    pub values: Vec<f64>,
    pub fps: f64,
    /// Time of the first sample, seconds.
    pub t0: f64,
}

impl PulseSignal {
    pub fn new(values: Vec<f64>, fps: f64, t0: f64) -> Self {
        Self { values, fps, t0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.fps
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.fps
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Divides each channel of the window by its mean over the window.
pub fn temporal_normalize(window: &[[f64; 3]]) -> Result<[Vec<f64>; 3]> {
    if window.len() < 2 {
        return Err(RppgError::DegenerateWindow(format!(
            "window of {} samples, need at least 2",
            window.len()
        )));
    }
    let n = window.len() as f64;
    let mut out: [Vec<f64>; 3] = Default::default();
    for (c, channel) in out.iter_mut().enumerate() {
        let m = window.iter().map(|s| s[c]).sum::<f64>() / n;
        if !(m > 0.0) {
            return Err(RppgError::DegenerateWindow(format!("channel {c} has non-positive mean {m}")));
        }
        *channel = window.iter().map(|s| s[c] / m).collect();
    }
    Ok(out)
}

/// Projects a normalized window onto the skin-orthogonal plane and returns
/// the mean-centered alpha-tuned combination.
pub fn pos_project(normalized: &[Vec<f64>; 3]) -> Vec<f64> {
    let [r, g, b] = normalized;
    let s1: Vec<f64> = g.iter().zip(b).map(|(g, b)| g - b).collect();
    let s2: Vec<f64> = r.iter().zip(g).zip(b).map(|((r, g), b)| g + b - 2.0 * r).collect();
    let sd2 = std_dev(&s2);
    let alpha = if sd2 == 0.0 { 0.0 } else { std_dev(&s1) / sd2 };
    let h: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + alpha * b).collect();
    let m = mean(&h);
    h.into_iter().map(|v| v - m).collect()
}

/// Stride-1 sliding POS with overlap-add.
///
/// Each output sample is the average of the chunk values of every window
/// covering it; the result is re-centered to zero mean.
pub fn pos_sliding(trace: &RgbTrace, window_len: usize) -> Result<PulseSignal> {
    if window_len < 2 {
        return Err(RppgError::Config(format!(
            "POS window must span at least 2 samples, got {window_len}"
        )));
    }
    let n = trace.len();
    if n < window_len {
        return Err(RppgError::InsufficientData(format!(
            "trace has {n} samples, POS window needs {window_len}"
        )));
    }
    let colors = trace.colors();
    let mut acc = vec![0.0; n];
    let mut count = vec![0u32; n];
    for start in 0..=n - window_len {
        let chunk = pos_project(&temporal_normalize(&colors[start..start + window_len])?);
        for (k, v) in chunk.into_iter().enumerate() {
            acc[start + k] += v;
            count[start + k] += 1;
        }
    }
    let mut values: Vec<f64> = acc.iter().zip(&count).map(|(a, &c)| a / f64::from(c)).collect();
    let m = mean(&values);
    values.iter_mut().for_each(|v| *v -= m);
    Ok(PulseSignal::new(values, trace.fps, trace.t0()))
}
