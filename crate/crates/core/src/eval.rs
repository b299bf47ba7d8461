//! Agreement statistics between estimated and reference heart rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RppgError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectHr {
    pub subject: String,
    pub hr_bpm: f64,
}

impl SubjectHr {
    pub fn new(subject: impl Into<String>, hr_bpm: f64) -> Self {
        Self {
            subject: subject.into(),
            hr_bpm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectError {
    pub subject: String,
    pub ground_truth_bpm: f64,
    pub estimate_bpm: f64,
    /// `|estimate - ground truth|`
    pub abs_error_bpm: f64,
}

/// Bland-Altman statistics over `diff = ground truth - estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    /// Sample standard deviation of the differences.
    pub sd_diff: f64,
    pub limits_2sd: (f64, f64),
    pub limits_3sd: (f64, f64),
}

impl BlandAltman {
    pub fn within_2sd(&self, diff: f64) -> bool {
        diff >= self.limits_2sd.0 && diff <= self.limits_2sd.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Sorted by subject key.
    pub subjects: Vec<SubjectError>,
    pub mae: f64,
    pub rmse: f64,
    pub mean_error_rate_pct: f64,
    pub bland_altman: BlandAltman,
}

fn index(rows: &[SubjectHr], what: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.subject.clone(), row.hr_bpm).is_some() {
            return Err(RppgError::Join(format!("duplicate {what} subject {:?}", row.subject)));
        }
    }
    Ok(map)
}

pub fn evaluate(estimates: &[SubjectHr], ground_truth: &[SubjectHr]) -> Result<EvalReport> {
    let est = index(estimates, "estimate")?;
    let gt = index(ground_truth, "ground-truth")?;
    if est.is_empty() {
        return Err(RppgError::Join("no subjects to evaluate".into()));
    }
    let missing: Vec<&String> = gt
        .keys()
        .filter(|k| !est.contains_key(*k))
        .chain(est.keys().filter(|k| !gt.contains_key(*k)))
        .collect();
    if !missing.is_empty() {
        return Err(RppgError::Join(format!("subjects present on one side only: {missing:?}")));
    }

    let subjects: Vec<SubjectError> = gt
        .iter()
        .map(|(subject, &g)| {
            let e = est[subject];
            SubjectError {
                subject: subject.clone(),
                ground_truth_bpm: g,
                estimate_bpm: e,
                abs_error_bpm: (e - g).abs(),
            }
        })
        .collect();

    let n = subjects.len() as f64;
    let diffs: Vec<f64> = subjects.iter().map(|s| s.ground_truth_bpm - s.estimate_bpm).collect();
    let mae = subjects.iter().map(|s| s.abs_error_bpm).sum::<f64>() / n;
    let rmse = (diffs.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let mean_error_rate_pct = subjects.iter().map(|s| s.abs_error_bpm / s.ground_truth_bpm).sum::<f64>() / n * 100.0;

    let mean_diff = diffs.iter().sum::<f64>() / n;
    let sd_diff = if subjects.len() > 1 {
        (diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let limits = |k: f64| (mean_diff - k * sd_diff, mean_diff + k * sd_diff);

    Ok(EvalReport {
        subjects,
        mae,
        rmse,
        mean_error_rate_pct,
        bland_altman: BlandAltman {
            mean_diff,
            sd_diff,
            limits_2sd: limits(2.0),
            limits_3sd: limits(3.0),
        },
    })
}
