use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const PROGRESS_FILE: &str = "progress.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Metrics logged at one evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    pub step: u64,
    pub metrics: Vec<(String, f64)>,
    /// Seconds since the run started; kept out of `progress.csv`.
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub points: Vec<EvalPoint>,
    pub failure: Option<String>,
    pub dataset_source: Option<String>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub env: String,
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub status: String,
    pub error: Option<String>,
    pub steps_completed: u64,
    /// Last logged value of every metric; `None` when it was not finite.
    pub final_metrics: BTreeMap<String, Option<f64>>,
    pub dataset_source: Option<String>,
    pub wall_clock_secs: f64,
    pub config: BTreeMap<String, String>,
}

/// Shortest text that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            config: config.clone(),
            config_hash: config.hash(),
            points: Vec::new(),
            failure: None,
            dataset_source: None,
            wall_clock_secs: 0.0,
        }
    }

    pub fn push(&mut self, step: u64, metrics: Vec<(String, f64)>, wall_clock_secs: f64) {
        debug_assert!(self.points.last().is_none_or(|p| p.step < step), "steps must increase");
        self.points.push(EvalPoint {
            step,
            metrics,
            wall_clock_secs,
        });
    }

    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn steps_completed(&self) -> u64 {
        self.points.last().map_or(0, |p| p.step)
    }

    /// `(step, value)` pairs of one metric.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.metrics.iter().find(|(m, _)| m == metric).map(|(_, v)| (p.step, *v)))
            .collect()
    }

    pub fn final_value(&self, metric: &str) -> Option<f64> {
        self.series(metric).last().map(|(_, v)| *v)
    }

    /// `step,metric,value,config_hash,seed` rows; a failed run ends with a
    /// `failed` row.
    pub fn progress_csv(&self) -> String {
        let mut out = String::from("step,metric,value,config_hash,seed\n");
        let seed = self.config.seed;
        for p in &self.points {
            for (m, v) in &p.metrics {
                let _ = writeln!(out, "{},{},{},{},{}", p.step, m, format_value(*v), self.config_hash, seed);
            }
        }
        if self.failure.is_some() {
            let _ = writeln!(out, "{},failed,1,{},{}", self.steps_completed(), self.config_hash, seed);
        }
        out
    }

    pub fn summary(&self) -> Summary {
        let mut final_metrics = BTreeMap::new();
        for p in &self.points {
            for (m, v) in &p.metrics {
                final_metrics.insert(m.clone(), v.is_finite().then_some(*v));
            }
        }
        Summary {
            env: self.config.env.to_string(),
            method: self.config.method.to_string(),
            seed: self.config.seed,
            config_hash: self.config_hash.clone(),
            status: if self.is_failed() { "failed" } else { "completed" }.into(),
            error: self.failure.clone(),
            steps_completed: self.steps_completed(),
            final_metrics,
            dataset_source: self.dataset_source.clone(),
            wall_clock_secs: self.wall_clock_secs,
            config: self.config.pairs().into_iter().collect(),
        }
    }

    /// Writes `progress.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(PROGRESS_FILE), self.progress_csv())?;
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&self.summary())? + "\n")?;
        Ok(())
    }
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?)
}
