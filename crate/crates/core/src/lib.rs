//! Camera-based heart-rate estimation from facial video.
//!
//! The pipeline picks a skin ROI per frame from 3D face landmarks (forehead
//! when visible, otherwise the cheek favoured by head yaw), averages its
//! color, extracts a pulse with the plane-orthogonal-to-skin projection,
//! cleans it spectrally and estimates heart rate from interbeat intervals.
//!
//! ```no_run
//! use rppg_core::{extract_files, PipelineConfig};
//! use std::path::Path;
//!
//! let run = extract_files(
//!     Path::new("clip.json"),
//!     Path::new("clip.rgb"),
//!     Path::new("landmarks.jsonl"),
//!     &PipelineConfig::default(),
//! )?;
//! println!("{:.1} BPM", run.report.video_hr_bpm);
//! # Ok::<(), rppg_core::RppgError>(())
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod filters;
pub mod hr;
pub mod io;
pub mod landmarks;
pub mod pipeline;
pub mod pos;
pub mod roi;
pub mod synth;

pub use error::{Result, RppgError};
pub use eval::{evaluate, BlandAltman, EvalReport, SubjectError, SubjectHr};
pub use filters::{apply_filter_chain, asf_weights, cdf_weights, moving_average, FilterConfig, RgbSpectrum, SpectralWeights};
pub use hr::{csd, detect_peaks, ibi_hr, spectral_hr, welch_psd, HrEstimate, HrMethod, PeakConfig, PeakTrain, Psd, PsdMethod};
pub use io::{read_frame_stream, FrameStreamHeader, GroundTruth};
pub use landmarks::{estimate_yaw, forehead_visible, parse_landmark_frame, LandmarkSet, Point3, YawAngle};
pub use pipeline::{extract_files, run_pipeline, run_pipeline_detailed, HrReport, PipelineConfig, PipelineRun};
pub use pos::{pos_project, pos_sliding, temporal_normalize, PulseSignal, RgbTrace};
pub use roi::{crop_mean_rgb, select_roi, Frame, PixelRect, Region, RgbSample, RoiConfig, RoiSelection};
pub use synth::{synth_frames, synth_trace, SynthConfig, SynthVideo};
