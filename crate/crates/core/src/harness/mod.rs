//! Experiment orchestration: configs, runs, outputs and reports.

mod checkpoint;
mod config;
mod record;
mod report;
mod run;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{parse_config_text, ExperimentConfig, Method, CONFIG_KEYS};
pub use record::{format_value, read_summary, EvalPoint, RunRecord, Summary, PROGRESS_FILE, SUMMARY_FILE};
pub use report::{aggregate, collect_summaries, mean_std, reduction_pct, report_csv, report_json, ReportRow};
pub use run::{build_model, resolve_data_dir, run_experiment, DATA_DIR_ENV, MODEL_CHECKPOINT, POLICY_CHECKPOINT};
