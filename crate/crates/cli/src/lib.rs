//! Command-line front end: `extract`, `synth`, `eval`, `psd` and `bench`.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 insufficient
//! data, 4 file system error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use rppg_core::io::{write_frame_stream, write_json, write_landmark_stream};
use rppg_core::synth::SpecularEvent;
use rppg_core::{
    csd, evaluate, extract_files, run_pipeline, synth_frames, welch_psd, Frame, GroundTruth, PipelineConfig, RppgError, SubjectHr,
    SynthConfig,
};
use serde::Serialize;

pub mod args;

use args::{BenchArgs, Cli, Command, EvalArgs, ExtractArgs, PsdArgs, SynthArgs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// File names written by `synth`.
pub const FRAMES_HEADER: &str = "frames.json";
pub const FRAMES_PAYLOAD: &str = "frames.rgb";
pub const LANDMARKS: &str = "landmarks.jsonl";
pub const GROUND_TRUTH: &str = "ground_truth.json";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Input file that cannot be opened.
    File(PathBuf, std::io::Error),
    Core(RppgError),
    Csv(csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File(..) => EXIT_IO,
            CliError::Core(e) if e.is_insufficient_data() => EXIT_INSUFFICIENT,
            CliError::Core(RppgError::Config(_)) => EXIT_USAGE,
            CliError::Core(RppgError::Io(_)) => EXIT_IO,
            CliError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
            _ => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::File(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "csv: {e}"),
        }
    }
}

impl From<RppgError> for CliError {
    fn from(e: RppgError) -> Self {
        CliError::Core(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Extract(a) => extract(&a, out),
        Command::Synth(a) => synth(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Psd(a) => psd(&a, out),
        Command::Bench(a) => bench(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn check_readable(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        fs::File::open(p).map_err(|e| CliError::File(p.to_path_buf(), e))?;
    }
    Ok(())
}

fn extract(a: &ExtractArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_readable(&[&a.input.frames, &a.input.payload, &a.input.landmarks])?;
    let cfg = a.input.config.resolve()?;
    let run = extract_files(&a.input.frames, &a.input.payload, &a.input.landmarks, &cfg)?;
    write_json(&a.out, &run.report)?;
    let d = &run.report.diagnostics;
    writeln!(
        out,
        "video_hr_bpm {:.2} from {} windows, {}/{} frames used, {} region switches",
        run.report.video_hr_bpm,
        run.report.windows.len(),
        d.frames_used,
        d.frames_total,
        d.region_switches.len()
    )?;
    Ok(())
}

pub fn synth_config(a: &SynthArgs) -> SynthConfig {
    SynthConfig {
        hr_bpm: a.hr_bpm,
        fps: a.fps,
        duration_s: a.duration_s,
        pulse_rel_amp: a.pulse_rel_amp,
        intensity_mod: (a.intensity_amp, a.intensity_hz),
        specular_events: a
            .specular
            .iter()
            .map(|&(time, duration, magnitude)| SpecularEvent { time, duration, magnitude })
            .collect(),
        noise_sd: a.noise_sd,
        seed: a.seed,
        yaw_profile: match a.yaw_ramp {
            Some((from, to)) => vec![(0.0, from), (a.duration_s, to)],
            None => vec![(0.0, 0.0)],
        },
        occluded_forehead: a.occluded,
        ..SynthConfig::default()
    }
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let f = a.downsample;
    if f == 0 || !a.width.is_multiple_of(f) || !a.height.is_multiple_of(f) {
        return Err(CliError::Usage(format!("--downsample {f} must divide {}x{}", a.width, a.height)));
    }
    let cfg = synth_config(a);
    let video = synth_frames(&cfg, a.width, a.height, a.roi_size)?;
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;

    let mut failure = None;
    let frames = video.frames().map_while(|frame| match frame.downsample(f) {
        Ok(small) => Some(small),
        Err(e) => {
            failure = Some(e);
            None
        }
    });
    let header = write_frame_stream(
        &dir.join(FRAMES_HEADER),
        &dir.join(FRAMES_PAYLOAD),
        a.width / f,
        a.height / f,
        cfg.fps,
        frames,
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    write_landmark_stream(&dir.join(LANDMARKS), &video.landmark_stream())?;
    let truth = GroundTruth {
        hr_bpm: cfg.hr_bpm,
        fps: cfg.fps,
        duration_s: cfg.duration_s,
        seed: cfg.seed,
        peak_times: cfg.ground_truth_peaks().peak_times,
    };
    write_json(&dir.join(GROUND_TRUTH), &truth)?;
    writeln!(
        out,
        "wrote {} frames of {}x{} at {} fps to {}",
        header.frame_count,
        header.width,
        header.height,
        header.fps,
        dir.display()
    )?;
    Ok(())
}

fn read_subjects(path: &Path) -> Result<Vec<SubjectHr>, CliError> {
    check_readable(&[path])?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let rows = reader.deserialize().collect::<Result<Vec<SubjectHr>, _>>()?;
    Ok(rows)
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = evaluate(&read_subjects(&a.estimates)?, &read_subjects(&a.ground_truth)?)?;
    write_json(&a.out, &report)?;
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_path(path)?;
        for row in &report.subjects {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    let ba = &report.bland_altman;
    writeln!(
        out,
        "n {} mae {:.4} rmse {:.4} error_rate {:.3}% mean_diff {:.4} sd {:.4} limits_2sd [{:.4}, {:.4}]",
        report.subjects.len(),
        report.mae,
        report.rmse,
        report.mean_error_rate_pct,
        ba.mean_diff,
        ba.sd_diff,
        ba.limits_2sd.0,
        ba.limits_2sd.1
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    method: &'static str,
    freq_hz: f64,
    power: f64,
}

fn psd(a: &PsdArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_readable(&[&a.input.frames, &a.input.payload, &a.input.landmarks])?;
    let cfg = a.input.config.resolve()?;
    let run = extract_files(&a.input.frames, &a.input.payload, &a.input.landmarks, &cfg)?;
    let pulse = &run.stages.smoothed;
    let segment = cfg.welch_segment_s.min(pulse.duration() - 1.0 / pulse.fps);
    let welch = welch_psd(pulse, segment, 0.5)?;
    let (x, y, pairing) = run.csd_pair();
    let cross = csd(&x, &y, segment.min(x.duration()))?;

    let mut w = csv::Writer::from_path(&a.out)?;
    for (method, psd) in [("welch", &welch), ("csd", &cross)] {
        for (&freq_hz, &power) in psd.freqs.iter().zip(&psd.power) {
            w.serialize(SpectrumRow { method, freq_hz, power })?;
        }
    }
    w.flush()?;
    let d = &run.report.diagnostics;
    writeln!(
        out,
        "welch peak {} BPM, csd peak {} BPM ({pairing:?} pairing)",
        fmt_opt(d.welch_hr_bpm),
        fmt_opt(d.csd_hr_bpm)
    )?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

/// One throughput measurement.
#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub roi_size: u32,
    /// Best wall time over the repetitions.
    pub seconds: f64,
    pub frames_per_second: f64,
    pub video_hr_bpm: f64,
}

/// Times `run_pipeline` over a synthetic clip held in memory. Rendering
/// happens before the clock starts.
pub fn bench_throughput(a: &BenchArgs) -> Result<BenchResult, CliError> {
    let synth = SynthConfig {
        hr_bpm: a.hr_bpm,
        fps: a.fps,
        duration_s: a.duration,
        ..SynthConfig::default()
    };
    let video = synth_frames(&synth, a.width, a.height, a.roi_size)?;
    let frames: Vec<Frame> = video.frames().collect();
    let landmarks = video.landmark_stream();
    let cfg = PipelineConfig {
        roi: rppg_core::RoiConfig {
            roi_size: a.roi_size,
            ..Default::default()
        },
        ..PipelineConfig::default()
    };

    let mut best = f64::INFINITY;
    let mut hr = f64::NAN;
    for _ in 0..a.repeat.max(1) {
        let input = frames.iter().enumerate().map(|(i, f)| Ok((i as f64 / a.fps, f.clone())));
        let start = Instant::now();
        let report = run_pipeline(input, &landmarks, a.fps, &cfg)?;
        best = best.min(start.elapsed().as_secs_f64());
        hr = report.video_hr_bpm;
    }
    Ok(BenchResult {
        frames: frames.len(),
        width: a.width,
        height: a.height,
        roi_size: a.roi_size,
        seconds: best,
        frames_per_second: frames.len() as f64 / best,
        video_hr_bpm: hr,
    })
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let r = bench_throughput(a)?;
    writeln!(
        out,
        "{} frames ({}x{}, roi {}) in {:.3} s: {:.1} frames/s, video_hr_bpm {:.2}",
        r.frames, r.width, r.height, r.roi_size, r.seconds, r.frames_per_second, r.video_hr_bpm
    )?;
    if let Some(path) = &a.out {
        write_json(path, &r)?;
    }
    Ok(())
}
