//! Heart rate from the filtered pulse.
//!
//! The production path detects pulse peaks, takes interbeat intervals
//! `t_n - t_{n-1}` and reports `60 / mean(IBI)` per tumbling window. Welch
//! and cross-spectral densities are kept for diagnostics.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::filters::fft_real;
use crate::pos::{std_dev, PulseSignal};

/// Plausible heart-rate range in BPM; estimates outside it are discarded.
pub const HR_RANGE_BPM: (f64, f64) = (42.0, 240.0);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakTrain {
    pub peak_times: Vec<f64>,
    pub peak_indices: Vec<usize>,
}

impl PeakTrain {
    pub fn len(&self) -> usize {
        self.peak_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_times.is_empty()
    }

    /// `t_n - t_{n-1}` for consecutive peaks.
    pub fn intervals(&self) -> Vec<f64> {
        self.peak_times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HrMethod {
    Ibi,
    WelchPeak,
    CsdPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrEstimate {
    pub window_start: f64,
    pub window_end: f64,
    pub hr_bpm: f64,
    pub n_ibis: usize,
    pub method: HrMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdMethod {
    Welch,
    Csd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub method: PsdMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    pub min_separation_s: f64,
    pub prominence_factor: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            min_separation_s: 0.25,
            prominence_factor: 0.5,
        }
    }
}

/// Topographic prominence of the peak at `i`: height above the higher of
/// the two lowest points reached before meeting a taller sample on each side.
fn prominence(x: &[f64], i: usize) -> f64 {
    let peak = x[i];
    let mut left_min = peak;
    for &v in x[..i].iter().rev() {
        if v > peak {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = peak;
    for &v in &x[i + 1..] {
        if v > peak {
            break;
        }
        right_min = right_min.min(v);
    }
    peak - left_min.max(right_min)
}

/// Strict local maxima with prominence at least `prominence_factor * SD`,
/// thinned tallest-first so no two kept peaks are closer than
/// `min_separation_s`.
pub fn detect_peaks(signal: &PulseSignal, min_separation_s: f64, prominence_factor: f64) -> Result<PeakTrain> {
    let x = &signal.values;
    if x.len() < 3 {
        return Err(RppgError::InsufficientData(format!(
            "peak detection needs 3 samples, got {}",
            x.len()
        )));
    }
    let threshold = prominence_factor * std_dev(x);
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > x[i - 1] && x[i] > x[i + 1])
        .filter(|&i| prominence(x, i) >= threshold)
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        let clear = kept.iter().all(|&k| (i.abs_diff(k) as f64) / signal.fps >= min_separation_s);
        if clear {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(PeakTrain {
        peak_times: kept.iter().map(|&i| signal.time_of(i)).collect(),
        peak_indices: kept,
    })
}

/// Per-window heart rate from interbeat intervals.
///
/// Windows tumble from `origin` with length `window_s`; each IBI belongs to
/// the window holding its later peak. Windows without IBIs, or whose rate
/// falls outside [`HR_RANGE_BPM`], are omitted.
pub fn ibi_hr(peaks: &PeakTrain, window_s: f64, origin: f64) -> Result<Vec<HrEstimate>> {
    if peaks.len() < 2 {
        return Err(RppgError::InsufficientPeaks { found: peaks.len() });
    }
    if !(window_s > 0.0) {
        return Err(RppgError::Config(format!("HR window must be positive, got {window_s}")));
    }
    let mut buckets: Vec<(i64, Vec<f64>)> = Vec::new();
    for pair in peaks.peak_times.windows(2) {
        let ibi = pair[1] - pair[0];
        let w = ((pair[1] - origin) / window_s).floor() as i64;
        match buckets.last_mut() {
            Some((idx, ibis)) if *idx == w => ibis.push(ibi),
            _ => buckets.push((w, vec![ibi])),
        }
    }
    Ok(buckets
        .into_iter()
        .map(|(w, ibis)| {
            let mean_ibi = ibis.iter().sum::<f64>() / ibis.len() as f64;
            HrEstimate {
                window_start: origin + w as f64 * window_s,
                window_end: origin + (w + 1) as f64 * window_s,
                hr_bpm: 60.0 / mean_ibi,
                n_ibis: ibis.len(),
                method: HrMethod::Ibi,
            }
        })
        .filter(|e| (HR_RANGE_BPM.0..=HR_RANGE_BPM.1).contains(&e.hr_bpm))
        .collect())
}

fn hann(n: usize) -> Vec<f64> {
    // Periodic Hann, as used for spectral averaging.
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

struct Segmentation {
    len: usize,
    starts: Vec<usize>,
    window: Vec<f64>,
    /// Converts |X|^2 into a one-sided density.
    scale: f64,
}

impl Segmentation {
    fn new(signal_len: usize, fps: f64, segment_s: f64, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(RppgError::Config(format!("overlap {overlap} must lie in [0, 1)")));
        }
        let len = (segment_s * fps).round() as usize;
        if len < 2 {
            return Err(RppgError::Config(format!("segment of {segment_s} s is too short")));
        }
        if len > signal_len {
            return Err(RppgError::InsufficientData(format!(
                "segment of {len} samples exceeds signal of {signal_len}"
            )));
        }
        let step = (((1.0 - overlap) * len as f64).round() as usize).max(1);
        let starts = (0..=signal_len - len).step_by(step).collect();
        let window = hann(len);
        let scale = 1.0 / (fps * window.iter().map(|w| w * w).sum::<f64>());
        Ok(Self {
            len,
            starts,
            window,
            scale,
        })
    }

    fn spectrum(&self, x: &[f64], start: usize) -> Vec<Complex64> {
        let seg = &x[start..start + self.len];
        let m = seg.iter().sum::<f64>() / self.len as f64;
        let tapered: Vec<f64> = seg.iter().zip(&self.window).map(|(v, w)| (v - m) * w).collect();
        let mut spec = fft_real(&tapered);
        spec.truncate(self.len / 2 + 1);
        spec
    }

    fn one_sided_factor(&self, k: usize) -> f64 {
        if k == 0 || (self.len.is_multiple_of(2) && k == self.len / 2) {
            1.0
        } else {
            2.0
        }
    }

    fn freqs(&self, fps: f64) -> Vec<f64> {
        (0..=self.len / 2).map(|k| k as f64 * fps / self.len as f64).collect()
    }
}

/// Welch averaged periodogram: Hann-tapered, mean-removed segments,
/// one-sided density in units^2/Hz.
pub fn welch_psd(signal: &PulseSignal, segment_s: f64, overlap: f64) -> Result<Psd> {
    let seg = Segmentation::new(signal.len(), signal.fps, segment_s, overlap)?;
    let mut power = vec![0.0; seg.len / 2 + 1];
    for &start in &seg.starts {
        for (p, c) in power.iter_mut().zip(seg.spectrum(&signal.values, start)) {
            *p += c.norm_sqr();
        }
    }
    let count = seg.starts.len() as f64;
    for (k, p) in power.iter_mut().enumerate() {
        *p *= seg.scale * seg.one_sided_factor(k) / count;
    }
    Ok(Psd {
        freqs: seg.freqs(signal.fps),
        power,
        method: PsdMethod::Welch,
    })
}

fn check_pair(x: &PulseSignal, y: &PulseSignal) -> Result<()> {
    if x.len() != y.len() || x.fps != y.fps {
        return Err(RppgError::Alignment(format!(
            "csd inputs differ: {} samples at {} fps vs {} at {} fps",
            x.len(),
            x.fps,
            y.len(),
            y.fps
        )));
    }
    Ok(())
}

fn averaged_cross(x: &PulseSignal, y: &PulseSignal, segment_s: f64) -> Result<(Segmentation, Vec<Complex64>)> {
    check_pair(x, y)?;
    let seg = Segmentation::new(x.len(), x.fps, segment_s, 0.5)?;
    let mut cross = vec![Complex64::new(0.0, 0.0); seg.len / 2 + 1];
    for &start in &seg.starts {
        let sx = seg.spectrum(&x.values, start);
        let sy = seg.spectrum(&y.values, start);
        for ((acc, a), b) in cross.iter_mut().zip(sx).zip(sy) {
            *acc += a.conj() * b;
        }
    }
    let count = seg.starts.len() as f64;
    for (k, c) in cross.iter_mut().enumerate() {
        *c *= seg.scale * seg.one_sided_factor(k) / count;
    }
    Ok((seg, cross))
}

/// Magnitude of the Welch-averaged cross spectrum (50% overlap).
pub fn csd(x: &PulseSignal, y: &PulseSignal, segment_s: f64) -> Result<Psd> {
    let (seg, cross) = averaged_cross(x, y, segment_s)?;
    Ok(Psd {
        freqs: seg.freqs(x.fps),
        power: cross.iter().map(|c| c.norm()).collect(),
        method: PsdMethod::Csd,
    })
}

/// Magnitude-squared coherence `|Pxy|^2 / (Pxx Pyy)` per bin.
pub fn coherence(x: &PulseSignal, y: &PulseSignal, segment_s: f64) -> Result<Vec<f64>> {
    let (_, pxy) = averaged_cross(x, y, segment_s)?;
    let pxx = welch_psd(x, segment_s, 0.5)?.power;
    let pyy = welch_psd(y, segment_s, 0.5)?.power;
    Ok(pxy
        .iter()
        .zip(pxx.iter().zip(&pyy))
        .map(|(c, (a, b))| if a * b > 0.0 { c.norm_sqr() / (a * b) } else { 0.0 })
        .collect())
}

/// HR at the in-band spectral maximum; ties go to the lowest frequency.
pub fn spectral_hr(psd: &Psd, band: (f64, f64)) -> Result<HrEstimate> {
    let mut best: Option<(f64, f64)> = None;
    for (&f, &p) in psd.freqs.iter().zip(&psd.power) {
        if f < band.0 || f > band.1 {
            continue;
        }
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((f, p));
        }
    }
    let (freq, _) = best.ok_or_else(|| RppgError::Config(format!("band ({}, {}) Hz contains no spectral bins", band.0, band.1)))?;
    let bin = psd.freqs.get(1).copied().unwrap_or(0.0);
    Ok(HrEstimate {
        window_start: 0.0,
        window_end: if bin > 0.0 { 1.0 / bin } else { 0.0 },
        hr_bpm: 60.0 * freq,
        n_ibis: 0,
        method: match psd.method {
            PsdMethod::Welch => HrMethod::WelchPeak,
            PsdMethod::Csd => HrMethod::CsdPeak,
        },
    })
}

/// In-band SNR in dB: power within `tolerance_hz` of `f0` and its second
/// harmonic against the rest of the band, from a single full-length periodogram.
pub fn spectral_snr_db(signal: &PulseSignal, f0: f64, band: (f64, f64), tolerance_hz: f64) -> f64 {
    let n = signal.len();
    if n < 2 {
        return f64::NAN;
    }
    let spec = fft_real(&signal.values);
    let (mut on, mut off) = (0.0, 0.0);
    for (k, c) in spec.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * signal.fps / n as f64;
        if f < band.0 || f > band.1 {
            continue;
        }
        if (f - f0).abs() <= tolerance_hz || (f - 2.0 * f0).abs() <= tolerance_hz {
            on += c.norm_sqr();
        } else {
            off += c.norm_sqr();
        }
    }
    10.0 * (on / off).log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, fps: f64, seconds: f64, phase: f64) -> PulseSignal {
        let n = (fps * seconds) as usize;
        PulseSignal::new((0..n).map(|i| (2.0 * PI * freq * i as f64 / fps + phase).sin()).collect(), fps, 0.0)
    }

    fn train(times: &[f64]) -> PeakTrain {
        PeakTrain {
            peak_times: times.to_vec(),
            peak_indices: (0..times.len()).collect(),
        }
    }

    #[test]
    fn sinusoid_peaks_one_second_apart() {
        // Maxima on samples 15, 45, ..., 285 (t = 0.5, 1.5, ..., 9.5 s).
        let s = tone(1.0, 30.0, 10.0, -PI / 2.0);
        let peaks = detect_peaks(&s, 0.25, 0.5).unwrap();
        assert_eq!(peaks.len(), 10);
        assert_eq!(peaks.peak_indices[0], 15);
        for ibi in peaks.intervals() {
            assert!((ibi - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        let s = PulseSignal::new(vec![0.3; 50], 30.0, 0.0);
        assert!(detect_peaks(&s, 0.25, 0.5).unwrap().is_empty());
    }

    #[test]
    fn close_peaks_keep_the_taller() {
        // Maxima at samples 10 (height 1.0) and 13 (height 1.2), 0.1 s apart.
        let mut x = vec![0.0; 30];
        x[9] = 0.5;
        x[10] = 1.0;
        x[11] = 0.2;
        x[12] = 0.6;
        x[13] = 1.2;
        x[14] = 0.4;
        let s = PulseSignal::new(x, 30.0, 0.0);
        let peaks = detect_peaks(&s, 0.25, 0.0).unwrap();
        assert_eq!(peaks.peak_indices, vec![13]);
        // Without the separation rule both survive.
        assert_eq!(detect_peaks(&s, 0.0, 0.0).unwrap().peak_indices, vec![10, 13]);
    }

    #[test]
    fn prominence_filters_ripple() {
        let mut x: Vec<f64> = (0..60).map(|i| (2.0 * PI * i as f64 / 30.0).sin()).collect();
        x[20] += 0.15; // small ripple on the falling edge
        x[21] -= 0.05;
        let s = PulseSignal::new(x, 30.0, 0.0);
        let peaks = detect_peaks(&s, 0.0, 0.5).unwrap();
        assert!(peaks.peak_indices.iter().all(|&i| i != 20));
    }

    #[test]
    fn unit_ibi_is_sixty_bpm() {
        let times: Vec<f64> = (0..10).map(f64::from).collect();
        let est = ibi_hr(&train(&times), 10.0, 0.0).unwrap();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].hr_bpm, 60.0);
        assert_eq!(est[0].n_ibis, 9);
    }

    #[test]
    fn half_second_ibi_is_120_bpm() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let est = ibi_hr(&train(&times), 10.0, 0.0).unwrap();
        assert!(est.iter().all(|e| e.hr_bpm == 120.0));
    }

    #[test]
    fn mean_ibi_of_three() {
        let est = ibi_hr(&train(&[0.0, 0.8, 1.7, 2.7]), 10.0, 0.0).unwrap();
        assert!((est[0].hr_bpm - 60.0 / 0.9).abs() < 1e-9);
    }

    #[test]
    fn windows_tumble_from_origin() {
        let times: Vec<f64> = (0..25).map(|i| 0.5 + i as f64).collect();
        let est = ibi_hr(&train(&times), 10.0, 0.0).unwrap();
        let bounds: Vec<(f64, f64)> = est.iter().map(|e| (e.window_start, e.window_end)).collect();
        assert_eq!(bounds, vec![(0.0, 10.0), (10.0, 20.0), (20.0, 30.0)]);
        assert_eq!(est.iter().map(|e| e.n_ibis).collect::<Vec<_>>(), vec![9, 10, 5]);
    }

    #[test]
    fn too_few_peaks() {
        assert!(matches!(
            ibi_hr(&train(&[1.0]), 10.0, 0.0),
            Err(RppgError::InsufficientPeaks { found: 1 })
        ));
    }

    #[test]
    fn welch_single_tone() {
        let psd = welch_psd(&tone(1.2, 30.0, 60.0, 0.0), 10.0, 0.5).unwrap();
        let argmax = psd.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((psd.freqs[argmax] - 1.2).abs() < 1e-12);
        assert!(psd.freqs.windows(2).all(|w| w[1] > w[0]));
        assert!(*psd.freqs.last().unwrap() <= 15.0);
    }

    #[test]
    fn segment_longer_than_signal() {
        let s = tone(1.0, 30.0, 5.0, 0.0);
        assert!(matches!(welch_psd(&s, 10.0, 0.5), Err(RppgError::InsufficientData(_))));
    }

    #[test]
    fn csd_alignment_checked() {
        let a = tone(1.0, 30.0, 20.0, 0.0);
        let b = tone(1.0, 30.0, 19.0, 0.0);
        assert!(matches!(csd(&a, &b, 5.0), Err(RppgError::Alignment(_))));
    }

    #[test]
    fn csd_common_tone() {
        let a = tone(1.2, 30.0, 40.0, 0.0);
        let b = tone(1.2, 30.0, 40.0, 1.0);
        let p = csd(&a, &b, 10.0).unwrap();
        let hr = spectral_hr(&p, (0.7, 4.0)).unwrap();
        assert!((hr.hr_bpm - 72.0).abs() < 1e-9);
        assert_eq!(hr.method, HrMethod::CsdPeak);
    }

    #[test]
    fn spectral_hr_conversion_and_band() {
        let psd = Psd {
            freqs: (0..50).map(|k| k as f64 * 0.1).collect(),
            power: (0..50)
                .map(|k| match k {
                    5 => 10.0,
                    12 => 3.0,
                    _ => 0.1,
                })
                .collect(),
            method: PsdMethod::Welch,
        };
        // 0.5 Hz is the global max but below the band.
        let hr = spectral_hr(&psd, (0.7, 4.0)).unwrap();
        assert!((hr.hr_bpm - 72.0).abs() < 1e-9);
        assert!(spectral_hr(&psd, (10.0, 11.0)).is_err());
    }
}
