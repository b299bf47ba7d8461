use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rppg_core::filters::normalize3;
use rppg_core::io::read_json;
use rppg_core::PipelineConfig;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "rppg", version, about = "Heart rate from facial video via landmark-guided POS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on a frame stream and landmark stream, write the report as JSON.
    Extract(ExtractArgs),
    /// Render a synthetic clip with known heart rate.
    Synth(SynthArgs),
    /// Compare per-subject estimates against ground truth.
    Eval(EvalArgs),
    /// Write Welch and cross spectra of the filtered pulse as CSV.
    Psd(PsdArgs),
    /// Measure pipeline throughput on an in-memory synthetic clip.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Frame stream header (JSON).
    #[arg(long)]
    pub frames: PathBuf,
    /// Raw rgb8 payload.
    #[arg(long)]
    pub payload: PathBuf,
    /// Landmark stream (JSON lines).
    #[arg(long)]
    pub landmarks: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// CSV with columns method, freq_hz, power.
    #[arg(long)]
    pub out: PathBuf,
}

/// Pipeline configuration: JSON file first, then individual flags on top.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub roi_size: Option<u32>,
    #[arg(long)]
    pub yaw_threshold_deg: Option<f64>,
    #[arg(long)]
    pub pos_window_s: Option<f64>,
    #[arg(long)]
    pub hr_window_s: Option<f64>,
    #[arg(long)]
    pub welch_segment_s: Option<f64>,
    #[arg(long)]
    pub asf_delta: Option<f64>,
    /// Comma separated RGB direction, normalized before use.
    #[arg(long, value_parser = parse_triple)]
    pub pulse_direction: Option<[f64; 3]>,
    #[arg(long)]
    pub band_lo_hz: Option<f64>,
    #[arg(long)]
    pub band_hi_hz: Option<f64>,
    #[arg(long)]
    pub ma_points: Option<usize>,
    #[arg(long)]
    pub min_separation_s: Option<f64>,
    #[arg(long)]
    pub prominence_factor: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:tt).+) => {
                if let Some(v) = self.$flag {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(roi_size => roi.roi_size);
        set!(yaw_threshold_deg => roi.yaw_threshold_deg);
        set!(pos_window_s => pos_window_s);
        set!(hr_window_s => hr_window_s);
        set!(welch_segment_s => welch_segment_s);
        set!(asf_delta => filter.asf_delta);
        set!(pulse_direction => filter.pulse_direction);
        set!(band_lo_hz => filter.band.0);
        set!(band_hi_hz => filter.band.1);
        set!(min_separation_s => peaks.min_separation_s);
        set!(prominence_factor => peaks.prominence_factor);
        if self.ma_points.is_some() {
            cfg.filter.ma_points = self.ma_points;
        }
        cfg.filter.pulse_direction = normalize3(cfg.filter.pulse_direction);
        Ok(cfg)
    }
}

fn load_config(path: &std::path::Path) -> Result<PipelineConfig, CliError> {
    let raw: serde_json::Value = read_json(path)?;
    let known = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    if let (Some(given), Some(known)) = (raw.as_object(), known.as_object()) {
        let unknown: Vec<&String> = given.keys().filter(|k| !known.contains_key(*k)).collect();
        if !unknown.is_empty() {
            return Err(CliError::Usage(format!("{}: unknown config keys {unknown:?}", path.display())));
        }
    }
    serde_json::from_value(raw).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected 3 comma separated values, got {}", p.len()))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 72.0)]
    pub hr_bpm: f64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 30.0)]
    pub duration_s: f64,
    #[arg(long, default_value_t = 2.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Relative illumination modulation amplitude.
    #[arg(long, default_value_t = 0.0)]
    pub intensity_amp: f64,
    #[arg(long, default_value_t = 0.0)]
    pub intensity_hz: f64,
    #[arg(long, default_value_t = 0.002)]
    pub pulse_rel_amp: f64,
    #[arg(long, default_value_t = 160)]
    pub width: u32,
    #[arg(long, default_value_t = 160)]
    pub height: u32,
    /// ROI size the clip is laid out for.
    #[arg(long, default_value_t = 40)]
    pub roi_size: u32,
    /// Block-average frames by this factor before writing.
    #[arg(long, default_value_t = 1)]
    pub downsample: u32,
    /// Linear yaw ramp `START:END` in degrees over the clip.
    #[arg(long, value_parser = parse_ramp, allow_hyphen_values = true)]
    pub yaw_ramp: Option<(f64, f64)>,
    /// Mark the forehead as occluded in every landmark record.
    #[arg(long)]
    pub occluded: bool,
    /// Specular flash `TIME:DURATION:MAGNITUDE`, repeatable.
    #[arg(long = "specular", value_parser = parse_specular)]
    pub specular: Vec<(f64, f64, f64)>,
}

fn parse_ramp(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:END")?;
    Ok((a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?))
}

fn parse_specular(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [t, d, m] => Ok((t, d, m)),
        _ => Err("expected TIME:DURATION:MAGNITUDE".into()),
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV with columns subject, hr_bpm.
    #[arg(long)]
    pub estimates: PathBuf,
    /// CSV with columns subject, hr_bpm.
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-subject rows.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 160)]
    pub width: u32,
    #[arg(long, default_value_t = 160)]
    pub height: u32,
    #[arg(long, default_value_t = 40)]
    pub roi_size: u32,
    #[arg(long, default_value_t = 72.0)]
    pub hr_bpm: f64,
    /// Timed repetitions; the best is reported.
    #[arg(long, default_value_t = 3)]
    pub repeat: u32,
    /// Also write the measurement as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
