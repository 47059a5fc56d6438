use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Method;
use super::record::{format_value, read_summary, Summary, SUMMARY_FILE};
use crate::envs::EnvId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub env: String,
    pub method: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Relative change of the mean against the same method on plain Mountain Car.
    pub reduction_pct: Option<f64>,
    pub config_hashes: Vec<String>,
    pub seeds: Vec<u64>,
}

/// `100 * (stoch - nostoch) / nostoch`.
pub fn reduction_pct(nostoch: f64, stoch: f64) -> f64 {
    100.0 * (stoch - nostoch) / nostoch
}

/// Mean and sample standard deviation; the std of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn find_runs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(SUMMARY_FILE).is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        find_runs(&d, out)?;
    }
    Ok(())
}

/// Summaries of every run directory at or below each of `dirs`.
pub fn collect_summaries(dirs: &[PathBuf]) -> Result<Vec<Summary>> {
    let mut runs = Vec::new();
    for d in dirs {
        if !d.is_dir() {
            return Err(Error::Usage(format!("{} is not a directory", d.display())));
        }
        find_runs(d, &mut runs)?;
    }
    runs.sort();
    runs.dedup();
    runs.iter().map(|r| read_summary(r)).collect()
}

fn headline_metric(env: EnvId) -> &'static str {
    if env.is_control() {
        "coverage"
    } else {
        "reward_ratio"
    }
}

/// Per `(env, method)` mean and std of the final headline metric over completed runs.
pub fn aggregate(summaries: &[Summary]) -> Result<Vec<ReportRow>> {
    type Cell = (Vec<f64>, Vec<String>, Vec<u64>);
    let mut cells: BTreeMap<(usize, Method), Cell> = BTreeMap::new();
    for s in summaries {
        if s.status != "completed" {
            log::warn!("skipping failed run {} {} seed {}", s.env, s.method, s.seed);
            continue;
        }
        let env: EnvId = s.env.parse()?;
        let method: Method = s.method.parse()?;
        let metric = headline_metric(env);
        let v = match s.final_metrics.get(metric) {
            Some(Some(v)) => *v,
            Some(None) => f64::INFINITY,
            None => return Err(Error::Usage(format!("run {} {} seed {} has no {metric}", s.env, s.method, s.seed))),
        };
        let order = EnvId::ALL.iter().position(|e| *e == env).unwrap_or(usize::MAX);
        let cell = cells.entry((order, method)).or_default();
        cell.0.push(v);
        cell.1.push(s.config_hash.clone());
        cell.2.push(s.seed);
    }
    if cells.is_empty() {
        return Err(Error::Usage("no completed runs to report".into()));
    }
    let mut rows: Vec<ReportRow> = cells
        .into_iter()
        .map(|((order, method), (mut values, mut hashes, seeds))| {
            let mut paired: Vec<(u64, f64)> = seeds.into_iter().zip(values.drain(..)).collect();
            paired.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let values: Vec<f64> = paired.iter().map(|p| p.1).collect();
            let (mean, std) = mean_std(&values);
            hashes.sort();
            hashes.dedup();
            let env = EnvId::ALL[order];
            ReportRow {
                env: env.to_string(),
                method: method.to_string(),
                metric: headline_metric(env).into(),
                n: values.len(),
                mean,
                std,
                reduction_pct: None,
                config_hashes: hashes,
                seeds: paired.iter().map(|p| p.0).collect(),
            }
        })
        .collect();
    let baseline: BTreeMap<String, f64> = rows
        .iter()
        .filter(|r| r.env == EnvId::MountainCar.as_str())
        .map(|r| (r.method.clone(), r.mean))
        .collect();
    for r in rows.iter_mut() {
        if r.env == EnvId::SmcFrozen.as_str() || r.env == EnvId::SmcEvolving.as_str() {
            r.reduction_pct = baseline.get(&r.method).map(|&b| reduction_pct(b, r.mean));
        }
    }
    Ok(rows)
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("env,method,metric,n,mean,std,reduction_pct,config_hash,seeds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.env,
            r.method,
            r.metric,
            r.n,
            format_value(r.mean),
            format_value(r.std),
            r.reduction_pct.map(format_value).unwrap_or_default(),
            r.config_hashes.join(";"),
            r.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
        );
    }
    out
}

pub fn report_json(rows: &[ReportRow]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)? + "\n")
}
