//! Synthetic skin videos with known heart rate.
//!
//! Colors follow a dichromatic reflection model: a diffuse term carrying a
//! small pulsatile modulation along the blood-volume color direction, an
//! achromatic specular term, and a shared multiplicative illumination
//! intensity. Landmarks come from a fixed face template rotated about the
//! vertical axis according to a yaw profile.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::filters::{normalize3, DEFAULT_PULSE_DIRECTION};
use crate::hr::{PeakTrain, HR_RANGE_BPM};
use crate::landmarks::{LandmarkSet, Point3, FOREHEAD, LANDMARK_COUNT, LEFT_CHEEK, RIGHT_CHEEK};
use crate::pos::RgbTrace;
use crate::roi::{Frame, Region, RgbSample};

/// Relative weight of the second harmonic in the pulse waveform.
const HARMONIC: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecularEvent {
    pub time: f64,
    pub duration: f64,
    /// Peak intensity added equally to every channel.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub hr_bpm: f64,
    pub fps: f64,
    pub duration_s: f64,
    pub pulse_rel_amp: f64,
    pub skin_base: [f64; 3],
    /// Illumination modulation `(amplitude, frequency_hz)`.
    pub intensity_mod: (f64, f64),
    pub specular_events: Vec<SpecularEvent>,
    pub noise_sd: f64,
    pub seed: u64,
    /// Piecewise-linear `(time_s, yaw_deg)` knots, held constant past the ends.
    pub yaw_profile: Vec<(f64, f64)>,
    pub pulse_direction: [f64; 3],
    pub occluded_forehead: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            hr_bpm: 72.0,
            fps: 30.0,
            duration_s: 30.0,
            pulse_rel_amp: 0.002,
            skin_base: [170.0, 120.0, 100.0],
            intensity_mod: (0.0, 0.0),
            specular_events: Vec::new(),
            noise_sd: 2.0,
            seed: 42,
            yaw_profile: vec![(0.0, 0.0)],
            pulse_direction: normalize3(DEFAULT_PULSE_DIRECTION),
            occluded_forehead: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(RppgError::Config(m));
        if !(HR_RANGE_BPM.0..=HR_RANGE_BPM.1).contains(&self.hr_bpm) {
            return err(format!("hr_bpm {} outside {}..{} BPM", self.hr_bpm, HR_RANGE_BPM.0, HR_RANGE_BPM.1));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) || !(self.duration_s > 0.0) {
            return err("fps and duration must be positive".into());
        }
        if self.hr_bpm / 60.0 >= self.fps / 2.0 {
            return err("heart rate above the Nyquist frequency".into());
        }
        if !(0.0..0.1).contains(&self.pulse_rel_amp) {
            return err(format!("pulse_rel_amp {} outside [0, 0.1)", self.pulse_rel_amp));
        }
        if self.skin_base.iter().any(|c| !(0.0..=255.0).contains(c)) {
            return err("skin_base channels must lie in [0, 255]".into());
        }
        if !(0.0..1.0).contains(&self.intensity_mod.0) || self.intensity_mod.1 < 0.0 {
            return err("intensity modulation amplitude must lie in [0, 1)".into());
        }
        if !(self.noise_sd >= 0.0) {
            return err("noise_sd must be non-negative".into());
        }
        if self.yaw_profile.is_empty() {
            return err("yaw_profile needs at least one knot".into());
        }
        if self.yaw_profile.iter().any(|&(_, y)| !(y > -90.0 && y < 90.0)) {
            return err("yaw must lie in (-90, 90) degrees".into());
        }
        if self.yaw_profile.windows(2).any(|w| w[1].0 <= w[0].0) {
            return err("yaw_profile times must be strictly increasing".into());
        }
        let norm = self.pulse_direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return err("pulse_direction must be a unit vector".into());
        }
        for e in &self.specular_events {
            if !(e.duration > 0.0) || e.magnitude < 0.0 {
                return err("specular events need positive duration and non-negative magnitude".into());
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn hr_hz(&self) -> f64 {
        self.hr_bpm / 60.0
    }

    /// Unit-scale pulse waveform with one maximum per beat.
    pub fn pulse_wave(&self, t: f64) -> f64 {
        let w = 2.0 * PI * self.hr_hz() * t;
        w.sin() + HARMONIC * (2.0 * w).sin()
    }

    fn specular(&self, t: f64) -> f64 {
        self.specular_events
            .iter()
            .filter(|e| t >= e.time && t < e.time + e.duration)
            .map(|e| e.magnitude * (PI * (t - e.time) / e.duration).sin().powi(2))
            .sum()
    }

    pub fn intensity(&self, t: f64) -> f64 {
        let (amp, freq) = self.intensity_mod;
        1.0 + amp * (2.0 * PI * freq * t).sin()
    }

    /// Noise-free ROI color at time `t`.
    pub fn clean_color(&self, t: f64) -> [f64; 3] {
        let p = self.pulse_wave(t);
        let spec = self.specular(t);
        let i = self.intensity(t);
        std::array::from_fn(|c| {
            let diffuse = self.skin_base[c] * (1.0 + self.pulse_rel_amp * self.pulse_direction[c] * p);
            i * (diffuse + spec)
        })
    }

    pub fn yaw_at(&self, t: f64) -> f64 {
        let knots = &self.yaw_profile;
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let k = knots.windows(2).find(|w| t < w[1].0).expect("t inside the profile");
        let (a, b) = (k[0], k[1]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    /// Times of the pulse waveform maxima within the clip.
    pub fn ground_truth_peaks(&self) -> PeakTrain {
        // d/dphi (sin + h sin 2phi) = 0  =>  4h c^2 + c - 2h = 0 with c = cos(phi).
        let c = (-1.0 + (1.0 + 32.0 * HARMONIC * HARMONIC).sqrt()) / (8.0 * HARMONIC);
        let phase = c.acos();
        let period = 1.0 / self.hr_hz();
        let end = self.frame_count() as f64 / self.fps;
        let first = phase / (2.0 * PI) * period;
        let peak_times: Vec<f64> = (0..).map(|k| first + k as f64 * period).take_while(|&t| t < end).collect();
        let last_index = self.frame_count().saturating_sub(1);
        let peak_indices = peak_times
            .iter()
            .map(|t| ((t * self.fps).round() as usize).min(last_index))
            .collect();
        PeakTrain { peak_times, peak_indices }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Spatially averaged trace with per-sample channel noise, plus the true peaks.
pub fn synth_trace(cfg: &SynthConfig) -> Result<(RgbTrace, PeakTrain)> {
    cfg.validate()?;
    let mut rng = cfg.rng(0);
    let samples = (0..cfg.frame_count())
        .map(|i| {
            let t = i as f64 / cfg.fps;
            let c = cfg.clean_color(t);
            let mut noisy = [0.0; 3];
            for ch in 0..3 {
                let n: f64 = rng.sample(StandardNormal);
                noisy[ch] = (c[ch] + cfg.noise_sd * n).clamp(0.0, 255.0);
            }
            RgbSample {
                timestamp: t,
                r: noisy[0],
                g: noisy[1],
                b: noisy[2],
                region: Region::Forehead,
            }
        })
        .collect();
    Ok((RgbTrace::new(samples, cfg.fps)?, cfg.ground_truth_peaks()))
}

/// Rotation pivot of the template head, in normalized coordinates.
pub const HEAD_PIVOT: Point3 = Point3::new(0.5, 0.5, 0.05);

/// Frontal face template: three ROI anchors placed explicitly, the rest on
/// a spiral over the front of an ellipsoid. Mirror symmetric in the anchors.
pub fn canonical_template() -> Vec<Point3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut points: Vec<Point3> = (0..LANDMARK_COUNT)
        .map(|i| {
            let u = (i as f64 + 0.5) / LANDMARK_COUNT as f64;
            let polar = (1.0 - u).acos();
            let azimuth = golden * i as f64;
            Point3::new(
                HEAD_PIVOT.x + 0.16 * polar.sin() * azimuth.cos(),
                HEAD_PIVOT.y + 0.22 * polar.sin() * azimuth.sin(),
                HEAD_PIVOT.z - 0.15 * polar.cos(),
            )
        })
        .collect();
    points[FOREHEAD] = Point3::new(0.5, 0.28, -0.10);
    points[LEFT_CHEEK] = Point3::new(0.38, 0.58, -0.06);
    points[RIGHT_CHEEK] = Point3::new(0.62, 0.58, -0.06);
    points
}

/// Rigid rotation about the vertical axis through [`HEAD_PIVOT`].
pub fn rotate_yaw(points: &[Point3], yaw_deg: f64) -> Vec<Point3> {
    let (s, c) = yaw_deg.to_radians().sin_cos();
    points
        .iter()
        .map(|p| {
            let (x, z) = (p.x - HEAD_PIVOT.x, p.z - HEAD_PIVOT.z);
            Point3::new(HEAD_PIVOT.x + x * c + z * s, p.y, HEAD_PIVOT.z - x * s + z * c)
        })
        .collect()
}

/// Lazily rendered synthetic video: uniform frames of the instantaneous
/// clean color with per-pixel Gaussian noise, quantized to 8 bits.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    cfg: SynthConfig,
    width: u32,
    height: u32,
    template: Vec<Point3>,
}

impl SynthVideo {
    pub fn new(cfg: &SynthConfig, width: u32, height: u32, roi_size: u32) -> Result<Self> {
        cfg.validate()?;
        if width < 4 * roi_size || height < 4 * roi_size {
            return Err(RppgError::Config(format!(
                "{width}x{height} frame is too small for a {roi_size}-pixel ROI (need {} per side)",
                4 * roi_size
            )));
        }
        Ok(Self {
            cfg: cfg.clone(),
            width,
            height,
            template: canonical_template(),
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn frame_count(&self) -> usize {
        self.cfg.frame_count()
    }

    pub fn frame(&self, index: usize) -> Frame {
        let t = index as f64 / self.cfg.fps;
        let color = self.cfg.clean_color(t);
        let n_px = self.width as usize * self.height as usize;
        let mut data = Vec::with_capacity(n_px * 3);
        if self.cfg.noise_sd == 0.0 {
            let q = color.map(|c| c.round().clamp(0.0, 255.0) as u8);
            data.extend(q.iter().copied().cycle().take(n_px * 3));
        } else {
            // Independent substream per frame.
            let mut rng = self.cfg.rng(index as u64 + 1);
            for _ in 0..n_px {
                for c in color {
                    let n: f64 = rng.sample(StandardNormal);
                    data.push((c + self.cfg.noise_sd * n).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Frame {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn landmarks(&self, index: usize) -> LandmarkSet {
        let t = index as f64 / self.cfg.fps;
        LandmarkSet {
            frame_index: index as u64,
            timestamp: t,
            points: rotate_yaw(&self.template, self.cfg.yaw_at(t)),
            detected: true,
            occluded_forehead: self.cfg.occluded_forehead,
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = Frame> + '_ {
        (0..self.frame_count()).map(|i| self.frame(i))
    }

    pub fn landmark_stream(&self) -> Vec<LandmarkSet> {
        (0..self.frame_count()).map(|i| self.landmarks(i)).collect()
    }
}

/// Frame and landmark streams for a synthetic clip.
pub fn synth_frames(cfg: &SynthConfig, width: u32, height: u32, roi_size: u32) -> Result<SynthVideo> {
    SynthVideo::new(cfg, width, height, roi_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::estimate_yaw;

    #[test]
    fn all_modulations_off_gives_constant_trace() {
        let cfg = SynthConfig {
            noise_sd: 0.0,
            pulse_rel_amp: 0.0,
            ..SynthConfig::default()
        };
        let (trace, _) = synth_trace(&cfg).unwrap();
        assert!(trace.colors().iter().all(|c| *c == cfg.skin_base));
    }

    #[test]
    fn peaks_spaced_by_period() {
        let (_, peaks) = synth_trace(&SynthConfig::default()).unwrap();
        for ibi in peaks.intervals() {
            assert!((ibi - 60.0 / 72.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_truth_peaks_are_waveform_maxima() {
        let cfg = SynthConfig::default();
        for &t in &cfg.ground_truth_peaks().peak_times {
            let here = cfg.pulse_wave(t);
            assert!(here > cfg.pulse_wave(t - 1e-4) && here > cfg.pulse_wave(t + 1e-4));
            assert!((here - 1.0).abs() < 0.5);
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let a = synth_trace(&SynthConfig::default()).unwrap().0;
        let b = synth_trace(&SynthConfig::default()).unwrap().0;
        assert_eq!(a, b);
        let c = synth_trace(&SynthConfig {
            seed: 7,
            ..SynthConfig::default()
        })
        .unwrap()
        .0;
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SynthConfig {
                hr_bpm: 20.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                pulse_rel_amp: 0.2,
                ..SynthConfig::default()
            },
            SynthConfig {
                noise_sd: -1.0,
                ..SynthConfig::default()
            },
            SynthConfig {
                yaw_profile: vec![(0.0, 95.0)],
                ..SynthConfig::default()
            },
        ] {
            assert!(matches!(synth_trace(&cfg), Err(RppgError::Config(_))));
        }
    }

    #[test]
    fn frame_too_small_for_roi() {
        assert!(matches!(
            synth_frames(&SynthConfig::default(), 150, 400, 40),
            Err(RppgError::Config(_))
        ));
    }

    #[test]
    fn yaw_profile_interpolates() {
        let cfg = SynthConfig {
            yaw_profile: vec![(0.0, 0.0), (10.0, 25.0)],
            ..SynthConfig::default()
        };
        assert_eq!(cfg.yaw_at(-1.0), 0.0);
        assert_eq!(cfg.yaw_at(4.0), 10.0);
        assert_eq!(cfg.yaw_at(12.0), 25.0);
    }

    #[test]
    fn template_is_frontal() {
        let lms = LandmarkSet::new(0, 0.0, canonical_template()).unwrap();
        assert_eq!(estimate_yaw(&lms).unwrap().degrees(), 0.0);
    }

    #[test]
    fn noisy_frames_are_reproducible() {
        let video = synth_frames(&SynthConfig::default(), 160, 160, 40).unwrap();
        assert_eq!(video.frame(5), video.frame(5));
        assert_ne!(video.frame(5), video.frame(6));
    }
}
