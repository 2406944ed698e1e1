//! Success rate, navigation error, average time and moving-time ratio, plus
//! per-run report aggregation.
//!
//! Undefined aggregates are `None` and render as `"n/a"` in reports.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::iteration::{AccuracyPoint, RunLog};
use crate::world::Point;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("duration {0} is negative or not finite")]
    BadDuration(f64),
    #[error("task {index}: total time must be positive (got {total})")]
    ZeroTotal { index: usize, total: f64 },
    #[error("task {index}: motion time {motion} exceeds total {total}")]
    MotionExceedsTotal { index: usize, motion: f64, total: f64 },
}

/// Fraction of successful tasks; 0 (with a warning) over zero tasks.
pub fn success_rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        warn!("success rate requested over zero tasks; reporting 0");
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

/// Mean Euclidean distance between predicted and true goals.
pub fn navigation_error(pairs: &[(Point, Point)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    Some(pairs.iter().map(|(p, t)| p.distance(t)).sum::<f64>() / pairs.len() as f64)
}

pub fn average_time(durations: &[f64]) -> Result<Option<f64>, MetricsError> {
    if let Some(&bad) = durations.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(MetricsError::BadDuration(bad));
    }
    if durations.is_empty() {
        return Ok(None);
    }
    Ok(Some(durations.iter().sum::<f64>() / durations.len() as f64))
}

/// Mean over tasks of `motion / total`.
pub fn moving_time_ratio(per_task: &[(f64, f64)]) -> Result<Option<f64>, MetricsError> {
    for (index, &(motion, total)) in per_task.iter().enumerate() {
        if !(motion >= 0.0 && motion.is_finite()) {
            return Err(MetricsError::BadDuration(motion));
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(MetricsError::ZeroTotal { index, total });
        }
        if motion > total {
            return Err(MetricsError::MotionExceedsTotal { index, motion, total });
        }
    }
    if per_task.is_empty() {
        return Ok(None);
    }
    Ok(Some(per_task.iter().map(|(m, t)| m / t).sum::<f64>() / per_task.len() as f64))
}

mod na {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str("n/a"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Some(x)),
            Raw::Text(t) if t == "n/a" => Ok(None),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"n/a\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub sr: f64,
    #[serde(with = "na")]
    pub ne: Option<f64>,
    #[serde(with = "na")]
    pub at: Option<f64>,
    #[serde(with = "na")]
    pub mtr: Option<f64>,
    pub n_tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u32,
    #[serde(flatten)]
    pub metrics: RunMetrics,
}

/// How NE is aggregated; written into every report.
pub const NE_AGGREGATION: &str =
    "per-task mean over index-aligned goal pairs, then mean over tasks with a defined value";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub ne_aggregation: String,
    pub mtr_aggregation: String,
    pub iterations: Vec<IterationMetrics>,
    /// Metrics of the final iteration.
    pub overall: RunMetrics,
}

impl RunSummary {
    pub fn accuracy(&self) -> Vec<AccuracyPoint> {
        self.iterations.iter().map(|m| AccuracyPoint { iteration: m.iteration, sr: m.metrics.sr }).collect()
    }
}

fn metrics_for<'a>(attempts: impl Iterator<Item = &'a crate::iteration::AttemptRecord>) -> RunMetrics {
    let attempts: Vec<_> = attempts.collect();
    let flags: Vec<bool> = attempts.iter().map(|a| a.success).collect();
    let nes: Vec<f64> = attempts.iter().filter_map(|a| a.ne).collect();
    let totals: Vec<f64> = attempts.iter().map(|a| a.total_duration.max(0.0)).collect();
    let ratios: Vec<(f64, f64)> = attempts
        .iter()
        .filter(|a| a.total_duration > 0.0)
        .map(|a| (a.motion_duration.clamp(0.0, a.total_duration), a.total_duration))
        .collect();
    RunMetrics {
        sr: if flags.is_empty() { 0.0 } else { success_rate(&flags) },
        ne: (!nes.is_empty()).then(|| nes.iter().sum::<f64>() / nes.len() as f64),
        at: average_time(&totals).expect("durations clamped non-negative"),
        mtr: moving_time_ratio(&ratios).expect("ratios pre-filtered"),
        n_tasks: attempts.len(),
    }
}

/// Per-iteration metrics plus the final-iteration summary. Attempts with zero
/// total time are left out of MTR.
pub fn summarize_run(log: &RunLog) -> RunSummary {
    let mut iterations: Vec<u32> = log.accuracy.iter().map(|p| p.iteration).collect();
    for a in &log.attempts {
        if !iterations.contains(&a.iteration) {
            iterations.push(a.iteration);
        }
    }
    iterations.sort_unstable();
    let per_iteration: Vec<IterationMetrics> = iterations
        .iter()
        .map(|&iteration| IterationMetrics { iteration, metrics: metrics_for(log.attempts_in(iteration)) })
        .collect();
    let overall = per_iteration
        .last()
        .map(|m| m.metrics.clone())
        .unwrap_or(RunMetrics { sr: 0.0, ne: None, at: None, mtr: None, n_tasks: 0 });
    RunSummary {
        run_id: log.header.run_id.clone(),
        ne_aggregation: NE_AGGREGATION.to_string(),
        mtr_aggregation: "mean of per-task motion/total ratios".to_string(),
        iterations: per_iteration,
        overall,
    }
}

pub fn write_summary(out: impl Write, summary: &RunSummary) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, summary)
}
