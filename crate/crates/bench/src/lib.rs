//! Shared inputs for the criterion benches in `benches/`.

use rppg_core::{synth_frames, synth_trace, Frame, LandmarkSet, RgbTrace, SynthConfig};

pub const FPS: f64 = 30.0;

/// Clip with the default 40 pixel ROI on 160x160 frames.
pub fn clip(duration_s: f64) -> (Vec<Frame>, Vec<LandmarkSet>) {
    let cfg = SynthConfig {
        duration_s,
        intensity_mod: (0.05, 0.3),
        ..SynthConfig::default()
    };
    let video = synth_frames(&cfg, 160, 160, 40).expect("valid synthetic config");
    (video.frames().collect(), video.landmark_stream())
}

/// ROI-averaged trace with the noise level of a 40x40 crop.
pub fn trace(duration_s: f64) -> RgbTrace {
    let cfg = SynthConfig {
        duration_s,
        noise_sd: 0.05,
        ..SynthConfig::default()
    };
    synth_trace(&cfg).expect("valid synthetic config").0
}

pub fn timed(frames: &[Frame]) -> impl Iterator<Item = rppg_core::Result<(f64, Frame)>> + '_ {
    frames.iter().enumerate().map(|(i, f)| Ok((i as f64 / FPS, f.clone())))
}
