use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use lbs_core::harness::{
    aggregate, collect_summaries, parse_config_text, report_csv, report_json, run_experiment, ExperimentConfig,
    CONFIG_KEYS,
};
use lbs_core::Error;

#[derive(Parser)]
#[command(name = "lbs", version, about = "Latent Bayesian surprise exploration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method on one environment.
    Run {
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        method: Option<String>,
        /// Environment steps (control) or training batches (image task).
        #[arg(long)]
        steps: Option<u64>,
        /// One seed, or a comma-separated list run on parallel threads.
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Aggregate finished runs into a coverage / ratio table.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a curiosity model on the stochastic image task and log reward ratios.
    Ratio {
        /// Directory with the MNIST test IDX files.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        method: String,
        #[arg(long)]
        batches: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        seed: Vec<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the keys accepted in config files.
    Keys,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn read_pairs(config: Option<&Path>) -> anyhow::Result<Vec<(String, String)>> {
    match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            Ok(parse_config_text(&text)?)
        }
        None => Ok(Vec::new()),
    }
}

fn split_override(s: &str) -> anyhow::Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

struct RunArgs {
    pairs: Vec<(String, String)>,
    seeds: Vec<u64>,
    out: Option<PathBuf>,
}

fn build_configs(args: RunArgs) -> anyhow::Result<Vec<ExperimentConfig>> {
    let mut base = ExperimentConfig::from_pairs(&args.pairs)?;
    if let Some(out) = args.out {
        base.out_dir = Some(out);
    }
    let seeds = if args.seeds.is_empty() { vec![base.seed] } else { args.seeds };
    let many = seeds.len() > 1;
    Ok(seeds
        .into_iter()
        .map(|s| {
            let mut c = base.clone();
            c.seed = s;
            if many {
                c.out_dir = c.out_dir.map(|d| d.join(format!("seed-{s}")));
            }
            c
        })
        .collect())
}

fn run_all(configs: Vec<ExperimentConfig>) -> anyhow::Result<()> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| scope.spawn(move || run_experiment(c)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let mut first_err = None;
    for (cfg, res) in configs.iter().zip(results) {
        match res {
            Ok(rec) => {
                let metric = if cfg.env.is_control() { "coverage" } else { "reward_ratio" };
                println!(
                    "{} {} seed {}: {} {} ({:.1}s)",
                    cfg.env,
                    cfg.method,
                    cfg.seed,
                    metric,
                    rec.final_value(metric).map_or("n/a".into(), |v| format!("{v:.4}")),
                    rec.wall_clock_secs
                );
            }
            Err(e) => {
                eprintln!("{} {} seed {}: {e}", cfg.env, cfg.method, cfg.seed);
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            env,
            method,
            steps,
            seed,
            config,
            out,
            overrides,
        } => {
            let mut pairs = read_pairs(config.as_deref())?;
            pairs.extend(env.map(|e| ("env".to_string(), e)));
            pairs.extend(method.map(|m| ("method".to_string(), m)));
            pairs.extend(steps.map(|s| ("steps".to_string(), s.to_string())));
            for o in &overrides {
                pairs.push(split_override(o)?);
            }
            run_all(build_configs(RunArgs { pairs, seeds: seed, out })?)
        }
        Command::Ratio {
            data,
            method,
            batches,
            seed,
            config,
            out,
            overrides,
        } => {
            let mut pairs = read_pairs(config.as_deref())?;
            pairs.push(("env".into(), "stochastic-image".into()));
            pairs.push(("method".into(), method));
            pairs.extend(batches.map(|b| ("steps".to_string(), b.to_string())));
            pairs.extend(data.map(|d| ("data_dir".to_string(), d.display().to_string())));
            for o in &overrides {
                pairs.push(split_override(o)?);
            }
            run_all(build_configs(RunArgs { pairs, seeds: seed, out })?)
        }
        Command::Report { runs, format, output } => {
            let rows = aggregate(&collect_summaries(&runs)?)?;
            let text = match format {
                Format::Csv => report_csv(&rows),
                Format::Json => report_json(&rows)?,
            };
            match output {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Keys => {
            for (k, doc) in CONFIG_KEYS {
                println!("{k:<16} {doc}");
            }
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Usage(_)) => 2,
        Some(Error::NonFinite(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
