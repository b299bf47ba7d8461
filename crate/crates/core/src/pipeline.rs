//! End-to-end driver: landmarks and frames in, heart-rate report out.
//!
//! Per frame: pick the ROI, average its color. Over the trace: sliding POS,
//! the spectral filter chain, peak detection and windowed IBI heart rate.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};
use crate::filters::{filter_stages, FilterConfig, FilterStages};
use crate::hr::{self, HrEstimate, PeakConfig, PeakTrain};
use crate::io::{read_frame_stream, read_landmark_stream};
use crate::landmarks::{estimate_yaw, LandmarkSet};
use crate::pos::{pos_sliding, PulseSignal, RgbTrace};
use crate::roi::{crop_mean_rgb, select_roi, Frame, Region, RgbSample, RoiConfig, RoiSelection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub roi: RoiConfig,
    #[serde(flatten)]
    pub filter: FilterConfig,
    #[serde(flatten)]
    pub peaks: PeakConfig,
    pub pos_window_s: f64,
    pub hr_window_s: f64,
    pub welch_segment_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            roi: RoiConfig::default(),
            filter: FilterConfig::default(),
            peaks: PeakConfig::default(),
            pos_window_s: 1.6,
            hr_window_s: 10.0,
            welch_segment_s: 10.0,
        }
    }
}

impl PipelineConfig {
    pub fn pos_window_frames(&self, fps: f64) -> usize {
        (self.pos_window_s * fps).round() as usize
    }

    pub fn validate(&self, fps: f64) -> Result<()> {
        self.filter.validate(fps)?;
        if self.roi.roi_size == 0 {
            return Err(RppgError::Config("roi_size must be positive".into()));
        }
        if self.pos_window_frames(fps) < 2 {
            return Err(RppgError::Config(format!(
                "pos_window_s {} spans fewer than 2 frames",
                self.pos_window_s
            )));
        }
        if !(self.hr_window_s > 0.0) || !(self.welch_segment_s > 0.0) {
            return Err(RppgError::Config("window lengths must be positive".into()));
        }
        if !(self.peaks.min_separation_s >= 0.0) || !(self.peaks.prominence_factor >= 0.0) {
            return Err(RppgError::Config("peak parameters must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frames_total: usize,
    pub frames_used: usize,
    /// Frames without a detected face.
    pub no_face_frames: Vec<u64>,
    /// Frames whose selected ROI left the image.
    pub out_of_bounds_frames: Vec<u64>,
    /// Trace sample indices where the ROI region changed.
    pub region_switches: Vec<usize>,
    pub straddling_pos_windows: usize,
    pub pos_window_frames: usize,
    pub ma_points: usize,
    pub peak_count: usize,
    pub snr_before_db: f64,
    pub snr_after_db: f64,
    pub welch_hr_bpm: Option<f64>,
    pub csd_hr_bpm: Option<f64>,
    pub csd_pairing: Option<CsdPairing>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsdPairing {
    /// Selected ROI pulse against the forehead pulse.
    Forehead,
    /// Pulse against itself delayed by one frame.
    Lagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrReport {
    pub windows: Vec<HrEstimate>,
    pub video_hr_bpm: f64,
    /// Region used for each frame that entered the trace.
    pub roi_timeline: Vec<Region>,
    pub diagnostics: Diagnostics,
}

/// Everything the pipeline computed, for callers that want the signals.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: HrReport,
    pub trace: RgbTrace,
    pub raw_pulse: PulseSignal,
    pub stages: FilterStages,
    pub peaks: PeakTrain,
    /// Filtered forehead pulse, when it was measurable alongside a cheek ROI.
    pub forehead_pulse: Option<PulseSignal>,
}

impl PipelineRun {
    /// The pair fed to the cross spectrum.
    pub fn csd_pair(&self) -> (PulseSignal, PulseSignal, CsdPairing) {
        let filtered = &self.stages.smoothed;
        match &self.forehead_pulse {
            Some(fh) if fh.len() == filtered.len() => (filtered.clone(), fh.clone(), CsdPairing::Forehead),
            _ => {
                let n = filtered.len();
                let lead = PulseSignal::new(filtered.values[1..].to_vec(), filtered.fps, filtered.time_of(1));
                let lag = PulseSignal::new(filtered.values[..n - 1].to_vec(), filtered.fps, filtered.t0);
                (lead, lag, CsdPairing::Lagged)
            }
        }
    }
}

pub fn run_pipeline<I>(frames: I, landmarks: &[LandmarkSet], fps: f64, cfg: &PipelineConfig) -> Result<HrReport>
where
    I: IntoIterator<Item = Result<(f64, Frame)>>,
{
    run_pipeline_detailed(frames, landmarks, fps, cfg).map(|run| run.report)
}

pub fn run_pipeline_detailed<I>(frames: I, landmarks: &[LandmarkSet], fps: f64, cfg: &PipelineConfig) -> Result<PipelineRun>
where
    I: IntoIterator<Item = Result<(f64, Frame)>>,
{
    cfg.validate(fps)?;
    let by_index: HashMap<u64, &LandmarkSet> = landmarks.iter().map(|l| (l.frame_index, l)).collect();

    let mut samples: Vec<RgbSample> = Vec::new();
    let mut forehead: Option<Vec<RgbSample>> = Some(Vec::new());
    let mut no_face = Vec::new();
    let mut out_of_bounds = Vec::new();
    let mut frames_total = 0usize;

    for (index, item) in frames.into_iter().enumerate() {
        let (_, frame) = item?;
        let index = index as u64;
        frames_total += 1;
        let lms = match by_index.get(&index) {
            Some(l) if l.detected => *l,
            _ => {
                no_face.push(index);
                continue;
            }
        };
        let yaw = estimate_yaw(lms)?;
        let roi = match select_roi(lms, yaw, frame.width, frame.height, &cfg.roi) {
            Ok(roi) => roi,
            Err(RppgError::RoiOutOfBounds { .. }) => {
                out_of_bounds.push(index);
                continue;
            }
            Err(e) => return Err(e),
        };
        let sample = crop_mean_rgb(&frame, &roi, lms.timestamp)?;
        if let Some(fh) = forehead.as_mut() {
            let fh_sample = if roi.region == Region::Forehead {
                Some(sample)
            } else {
                RoiSelection::for_region(lms, Region::Forehead, frame.width, frame.height, cfg.roi.roi_size)
                    .ok()
                    .map(|r| crop_mean_rgb(&frame, &r, lms.timestamp))
                    .transpose()?
            };
            match fh_sample {
                Some(s) => fh.push(s),
                None => forehead = None,
            }
        }
        samples.push(sample);
    }

    if let Some(extra) = landmarks.iter().find(|l| l.frame_index >= frames_total as u64) {
        return Err(RppgError::Format(format!(
            "landmark record for frame {} but the stream has {frames_total} frames",
            extra.frame_index
        )));
    }

    let pos_frames = cfg.pos_window_frames(fps);
    let needed = pos_frames.max((cfg.hr_window_s * fps).ceil() as usize);
    if samples.len() < needed {
        return Err(RppgError::InsufficientData(format!(
            "{} usable frames of {frames_total} ({} without a face, {} with the ROI outside the image); need {needed}",
            samples.len(),
            no_face.len(),
            out_of_bounds.len()
        )));
    }

    let roi_timeline: Vec<Region> = samples.iter().map(|s| s.region).collect();
    let trace = RgbTrace::new(samples, fps)?;
    let raw_pulse = pos_sliding(&trace, pos_frames)?;
    let stages = filter_stages(&raw_pulse, &trace, &cfg.filter)?;
    let ma_points = cfg.filter.ma_points_for(fps);

    let mut peaks = hr::detect_peaks(&stages.smoothed, cfg.peaks.min_separation_s, cfg.peaks.prominence_factor)?;
    // Use capture times so IBIs stay correct across skipped frames.
    let offset = (ma_points - 1) as f64 / 2.0;
    peaks.peak_times = peaks.peak_indices.iter().map(|&i| trace_time(&trace, i as f64 + offset)).collect();
    let origin = trace_time(&trace, offset);
    let windows = hr::ibi_hr(&peaks, cfg.hr_window_s, origin)?;
    if windows.is_empty() {
        return Err(RppgError::InsufficientData(
            "no window produced a heart rate inside the plausible range".into(),
        ));
    }
    let video_hr_bpm = windows.iter().map(|w| w.hr_bpm).sum::<f64>() / windows.len() as f64;

    let forehead_pulse = match forehead {
        Some(fh) if trace.samples.iter().any(|s| s.region != Region::Forehead) => {
            let fh_trace = RgbTrace::new(fh, fps)?;
            let fh_raw = pos_sliding(&fh_trace, pos_frames)?;
            Some(filter_stages(&fh_raw, &fh_trace, &cfg.filter)?.smoothed)
        }
        _ => None,
    };

    let f0 = video_hr_bpm / 60.0;
    let band = cfg.filter.band;
    let mut run = PipelineRun {
        report: HrReport {
            windows,
            video_hr_bpm,
            diagnostics: Diagnostics {
                frames_total,
                frames_used: trace.len(),
                no_face_frames: no_face,
                out_of_bounds_frames: out_of_bounds,
                region_switches: trace.region_switches.clone(),
                straddling_pos_windows: trace.straddling_windows(pos_frames).len(),
                pos_window_frames: pos_frames,
                ma_points,
                peak_count: peaks.len(),
                snr_before_db: hr::spectral_snr_db(&raw_pulse, f0, band, 0.1),
                snr_after_db: hr::spectral_snr_db(&stages.smoothed, f0, band, 0.1),
                welch_hr_bpm: None,
                csd_hr_bpm: None,
                csd_pairing: None,
            },
            roi_timeline,
        },
        trace,
        raw_pulse,
        stages,
        peaks,
        forehead_pulse,
    };

    let segment = cfg.welch_segment_s.min(run.stages.smoothed.duration() - 1.0 / fps);
    if let Ok(psd) = hr::welch_psd(&run.stages.smoothed, segment, 0.5) {
        run.report.diagnostics.welch_hr_bpm = hr::spectral_hr(&psd, band).ok().map(|e| e.hr_bpm);
    }
    let (x, y, pairing) = run.csd_pair();
    if let Ok(psd) = hr::csd(&x, &y, segment.min(x.duration())) {
        run.report.diagnostics.csd_hr_bpm = hr::spectral_hr(&psd, band).ok().map(|e| e.hr_bpm);
        run.report.diagnostics.csd_pairing = Some(pairing);
    }
    Ok(run)
}

/// Capture time at a fractional trace index, interpolating between samples.
fn trace_time(trace: &RgbTrace, position: f64) -> f64 {
    let last = trace.len() - 1;
    let i = (position.floor() as usize).min(last);
    let frac = position - i as f64;
    if i == last {
        return trace.samples[last].timestamp + frac / trace.fps;
    }
    let (a, b) = (trace.samples[i].timestamp, trace.samples[i + 1].timestamp);
    a + (b - a) * frac
}

/// Runs the pipeline on files in the on-disk formats.
pub fn extract_files(header: &Path, payload: &Path, landmarks: &Path, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let reader = read_frame_stream(header, payload)?;
    let fps = reader.header().fps;
    let lms = read_landmark_stream(landmarks)?;
    run_pipeline_detailed(reader, &lms, fps, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_frames, SynthConfig};

    fn frames_of(video: &crate::synth::SynthVideo) -> impl Iterator<Item = Result<(f64, Frame)>> + '_ {
        video.frames().enumerate().map(|(i, f)| Ok((i as f64 / video.config().fps, f)))
    }

    #[test]
    fn config_json_uses_flat_keys() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"roi_size": 20, "yaw_threshold_deg": 5, "ma_points": 3, "hr_window_s": 8}"#).unwrap();
        assert_eq!(cfg.roi.roi_size, 20);
        assert_eq!(cfg.roi.yaw_threshold_deg, 5.0);
        assert_eq!(cfg.filter.ma_points, Some(3));
        assert_eq!(cfg.hr_window_s, 8.0);
        assert_eq!(cfg.pos_window_s, 1.6);
        let back: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn all_undetected_is_insufficient() {
        let cfg = SynthConfig {
            duration_s: 12.0,
            ..SynthConfig::default()
        };
        let video = synth_frames(&cfg, 160, 160, 40).unwrap();
        let lms: Vec<LandmarkSet> = (0..video.frame_count())
            .map(|i| LandmarkSet::undetected(i as u64, i as f64 / 30.0))
            .collect();
        let err = run_pipeline(frames_of(&video), &lms, 30.0, &PipelineConfig::default()).unwrap_err();
        assert!(err.is_insufficient_data(), "{err}");
    }

    #[test]
    fn gaps_are_recorded() {
        let cfg = SynthConfig {
            duration_s: 15.0,
            ..SynthConfig::default()
        };
        let video = synth_frames(&cfg, 160, 160, 40).unwrap();
        let mut lms = video.landmark_stream();
        for i in [100, 101, 250] {
            lms[i] = LandmarkSet::undetected(i as u64, lms[i].timestamp);
        }
        let report = run_pipeline(frames_of(&video), &lms, 30.0, &PipelineConfig::default()).unwrap();
        assert_eq!(report.diagnostics.no_face_frames, vec![100, 101, 250]);
        assert_eq!(report.roi_timeline.len(), video.frame_count() - 3);
        assert!((report.video_hr_bpm - 72.0).abs() < 2.0, "{}", report.video_hr_bpm);
    }

    #[test]
    fn landmark_beyond_stream_rejected() {
        let cfg = SynthConfig {
            duration_s: 11.0,
            ..SynthConfig::default()
        };
        let video = synth_frames(&cfg, 160, 160, 40).unwrap();
        let mut lms = video.landmark_stream();
        let mut extra = lms.last().unwrap().clone();
        extra.frame_index += 1;
        extra.timestamp += 1.0 / 30.0;
        lms.push(extra);
        assert!(matches!(
            run_pipeline(frames_of(&video), &lms, 30.0, &PipelineConfig::default()),
            Err(RppgError::Format(_))
        ));
    }
}
