//! End-to-end acceptance run. Trains every method at full length, so expect
//! a few hours on one core. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::graphs;
use common::latent_toy::check_elbo_below_evidence;
use common::quadrature::{g1, kl_by_quadrature, KL_CASES};
use lbs_core::diffnum::{kl_diag_gaussian, DiagonalGaussian};
use lbs_core::envs::mountain_car::{MAX_POSITION, MAX_SPEED, MIN_POSITION};
use lbs_core::envs::{smc_step, EnvId, MountainCarState, NoiseVariant, StochMountainCarState};
use lbs_core::harness::{aggregate, reduction_pct, report_csv, ExperimentConfig, Method, ReportRow, PROGRESS_FILE};
use lbs_core::metrics::ReturnNormalizer;
use lbs_core::run_experiment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONTROL_SEEDS: [u64; 4] = [1, 2, 3, 4];
const IMAGE_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const CONTROL_ENVS: [EnvId; 3] = [EnvId::MountainCar, EnvId::SmcFrozen, EnvId::SmcEvolving];
const IMAGE_METHODS: [Method; 4] = [Method::Lbs, Method::Icm, Method::Rnd, Method::Disagreement];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(checks: Vec<(bool, String)>) -> Self {
        let pass = checks.iter().all(|c| c.0);
        let detail = checks
            .into_iter()
            .map(|(ok, msg)| format!("{}{msg}", if ok { "" } else { "NOT " }))
            .collect::<Vec<_>>()
            .join("; ");
        Verdict { pass, detail }
    }
}

/// Mean of the headline metric per `(env, method)`.
struct Table {
    rows: Vec<ReportRow>,
}

impl Table {
    fn row(&self, env: EnvId, method: Method) -> &ReportRow {
        self.rows
            .iter()
            .find(|r| r.env == env.as_str() && r.method == method.as_str())
            .unwrap_or_else(|| panic!("no runs for {env} {method}"))
    }

    fn mean(&self, env: EnvId, method: Method) -> f64 {
        self.row(env, method).mean
    }

    fn reduction(&self, env: EnvId, method: Method) -> f64 {
        self.row(env, method).reduction_pct.expect("reduction on a stochastic variant")
    }
}

fn run_dir(root: &Path, env: EnvId, method: Method, seed: u64) -> PathBuf {
    root.join(format!("{env}-{method}-{seed}"))
}

fn run_all(root: &Path, envs: &[EnvId], methods: &[Method], seeds: &[u64]) -> Table {
    let mut summaries = Vec::new();
    for &env in envs {
        for &method in methods {
            for &seed in seeds {
                let mut cfg = ExperimentConfig::new(env, method);
                cfg.seed = seed;
                cfg.out_dir = Some(run_dir(root, env, method, seed));
                let t = Instant::now();
                let rec = run_experiment(&cfg).unwrap_or_else(|e| panic!("{env} {method} seed {seed}: {e}"));
                let metric = if env.is_control() { "coverage" } else { "reward_ratio" };
                eprintln!(
                    "  {env} {method} seed {seed}: {metric} {:.4} ({:.0}s)",
                    rec.final_value(metric).unwrap_or(f64::NAN),
                    t.elapsed().as_secs_f64()
                );
                summaries.push(rec.summary());
            }
        }
    }
    let rows = aggregate(&summaries).expect("aggregate runs");
    print!("{}", report_csv(&rows));
    Table { rows }
}

fn coverage_criterion(t: &Table) -> Verdict {
    let lbs = t.mean(EnvId::MountainCar, Method::Lbs);
    let random = t.mean(EnvId::MountainCar, Method::Random);
    let rnd = t.mean(EnvId::MountainCar, Method::Rnd);
    Verdict::new(vec![
        (lbs >= 82.0, format!("LBS {lbs:.2} >= 82")),
        (random <= 25.0, format!("Random {random:.2} <= 25")),
        (rnd < lbs, format!("RND {rnd:.2} < LBS")),
    ])
}

fn stochastic_criterion(t: &Table) -> Verdict {
    let m = |env, method| t.mean(env, method);
    let (lf, le) = (m(EnvId::SmcFrozen, Method::Lbs), m(EnvId::SmcEvolving, Method::Lbs));
    let (icf, ice) = (m(EnvId::SmcFrozen, Method::Icm), m(EnvId::SmcEvolving, Method::Icm));
    let dis = m(EnvId::SmcEvolving, Method::Disagreement);
    let rnd = m(EnvId::SmcEvolving, Method::Rnd);
    Verdict::new(vec![
        (lf >= 70.0, format!("LBS frozen {lf:.2} >= 70")),
        (le >= 75.0, format!("LBS evolving {le:.2} >= 75")),
        (icf <= 45.0, format!("ICM frozen {icf:.2} <= 45")),
        (ice <= 35.0, format!("ICM evolving {ice:.2} <= 35")),
        (
            le > dis && dis > ice.max(rnd),
            format!("evolving LBS {le:.2} > Disagreement {dis:.2} > max(ICM {ice:.2}, RND {rnd:.2})"),
        ),
    ])
}

fn reduction_criterion(t: &Table) -> Verdict {
    let mut checks = Vec::new();
    for env in [EnvId::SmcFrozen, EnvId::SmcEvolving] {
        let lbs = t.reduction(env, Method::Lbs);
        // Reductions are negative percentages, so the smallest loss is the largest value.
        let others: Vec<(Method, f64)> =
            Method::ALL.into_iter().filter(|m| *m != Method::Lbs).map(|m| (m, t.reduction(env, m))).collect();
        let best_other = others.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
        checks.push((lbs > best_other, format!("{env}: LBS {lbs:.2} above others {others:?}")));
    }
    let evolving: Vec<(Method, f64)> = Method::ALL.into_iter().map(|m| (m, t.reduction(EnvId::SmcEvolving, m))).collect();
    let icm = t.reduction(EnvId::SmcEvolving, Method::Icm);
    let worst = evolving.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    checks.push((icm == worst, format!("ICM evolving {icm:.2} is the largest drop")));
    Verdict::new(checks)
}

fn image_criterion(t: &Table) -> Verdict {
    let lbs = t.mean(EnvId::StochasticImage, Method::Lbs);
    let dis = t.mean(EnvId::StochasticImage, Method::Disagreement);
    let icm = t.mean(EnvId::StochasticImage, Method::Icm);
    let rnd = t.mean(EnvId::StochasticImage, Method::Rnd);
    let band = 0.8..=1.5;
    Verdict::new(vec![
        (band.contains(&lbs), format!("LBS ratio {lbs:.3} in [0.8, 1.5]")),
        (band.contains(&dis), format!("Disagreement ratio {dis:.3} in [0.8, 1.5]")),
        (icm > lbs, format!("ICM {icm:.3} > LBS")),
        (rnd > lbs, format!("RND {rnd:.3} > LBS")),
    ])
}

fn gradient_check() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut accepted, mut tried) = (0, 0);
    while accepted < 100 && tried < 10_000 {
        tried += 1;
        let (ops, inputs) = graphs::random_case(&mut rng);
        match graphs::check(&ops, &inputs) {
            Ok(true) => accepted += 1,
            Ok(false) => {}
            Err(msg) => return (false, format!("autodiff: {msg}")),
        }
    }
    (accepted == 100, format!("autodiff matches differences on {accepted} graphs"))
}

fn quadrature_check() -> (bool, String) {
    let worst = KL_CASES
        .iter()
        .map(|&((mq, sq), (mp, sp))| {
            let (q, p) = (g1(mq, sq), g1(mp, sp));
            (kl_diag_gaussian(&q, &p).unwrap() - kl_by_quadrature(&q, &p)).abs()
        })
        .fold(0.0, f64::max);
    (worst < 1e-6, format!("KL vs quadrature max error {worst:.1e}"))
}

fn decomposition_check() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let dim = rng.random_range(1..7);
        let mut g = || {
            let m = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = (0..dim).map(|_| rng.random_range(0.05..3.0)).collect();
            DiagonalGaussian::new(m, s).unwrap()
        };
        let (q, p) = (g(), g());
        let kl = kl_diag_gaussian(&q, &p).unwrap();
        worst = worst.max((kl - (q.cross_entropy(&p).unwrap() - q.entropy())).abs());
    }
    (worst < 1e-9, format!("KL = cross-entropy - entropy, max error {worst:.1e}"))
}

fn bound_check() -> (bool, String) {
    match (0..4).try_for_each(check_elbo_below_evidence) {
        Ok(()) => (true, "bound below log-evidence on 4 toys".into()),
        Err(msg) => (false, format!("bound: {msg}")),
    }
}

fn clip_check() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut widest: f64 = 0.0;
    for scale in [1e-6, 1.0, 1e3, 1e9] {
        let mut rn = ReturnNormalizer::new(0.99);
        for _ in 0..20_000 {
            // Heavy tails: occasional huge spikes on top of a small base.
            let spike = if rng.random_bool(0.01) { 1e4 } else { 1.0 };
            let r = scale * spike * rng.random_range(0.0..1.0);
            widest = widest.max(rn.normalize(r, rng.random_bool(0.001)).abs());
        }
    }
    (widest <= 3.0, format!("normalized rewards within 3 (max {widest:.3})"))
}

fn freeze_check() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut moved = 0;
    for _ in 0..20_000 {
        let s = StochMountainCarState {
            original: MountainCarState::new(
                rng.random_range(MIN_POSITION..=MAX_POSITION),
                rng.random_range(-MAX_SPEED..=MAX_SPEED),
            ),
            noisy: rng.random_range(-1.0..=1.0),
        };
        let force = rng.random_range(-3.0..3.0);
        let remote = rng.random_range(1e-9..=1.0);
        if smc_step(s, force, remote, NoiseVariant::Frozen, &mut rng).state.original != s.original {
            moved += 1;
        }
    }
    (moved == 0, format!("frozen remote left the car untouched ({moved} moved)"))
}

fn numerical_criterion() -> Verdict {
    Verdict::new(vec![gradient_check(), quadrature_check(), decomposition_check(), bound_check(), clip_check(), freeze_check()])
}

fn determinism_criterion(root: &Path, full: &Path) -> Verdict {
    let mut checks = Vec::new();
    let mut compare = |cfg: ExperimentConfig, reference: Option<PathBuf>| {
        let label = format!("{} {} seed {} x{}", cfg.env, cfg.method, cfg.seed, cfg.steps);
        let dir = root.join(format!("{}-{}-{}-{}", cfg.env, cfg.method, cfg.seed, cfg.steps));
        let read = |d: &Path| fs::read(d.join(PROGRESS_FILE)).unwrap();
        let run = |d: &Path| {
            let mut c = cfg.clone();
            c.out_dir = Some(d.to_path_buf());
            run_experiment(&c).unwrap();
            read(d)
        };
        let first = match &reference {
            Some(d) => read(d),
            None => run(&dir.join("a")),
        };
        let second = run(&dir.join("b"));
        checks.push((first == second, format!("{label} identical")));
    };
    // One full-length run against its earlier twin, then short runs of every pairing.
    let mut cfg = ExperimentConfig::new(EnvId::SmcEvolving, Method::Lbs);
    cfg.seed = CONTROL_SEEDS[0];
    compare(cfg, Some(run_dir(full, EnvId::SmcEvolving, Method::Lbs, CONTROL_SEEDS[0])));
    for env in EnvId::ALL {
        for method in Method::ALL {
            if !env.is_control() && method == Method::Random {
                continue;
            }
            let mut cfg = ExperimentConfig::new(env, method);
            cfg.seed = 99;
            cfg.steps = if env.is_control() { 10_000 } else { 300 };
            compare(cfg, None);
        }
    }
    Verdict::new(checks)
}

fn reduction_table_criterion() -> Verdict {
    // (method, nostoch, frozen, evolving, frozen reduction, evolving reduction)
    let table = [
        ("LBS", 91.75, 82.38, 87.0, -10.21, -5.18),
        ("ICM", 91.75, 28.75, 17.25, -68.66, -81.20),
        ("RND", 67.38, 30.75, 28.38, -54.36, -57.88),
        ("Disagreement", 90.88, 68.75, 77.38, -24.35, -14.85),
        ("Random", 15.0, 11.5, 12.62, -23.33, -15.87),
    ];
    let checks = table
        .iter()
        .flat_map(|&(name, base, frozen, evolving, rf, re)| {
            let (gf, ge) = (reduction_pct(base, frozen), reduction_pct(base, evolving));
            [
                ((gf - rf).abs() < 0.01, format!("{name} frozen {gf:.2}")),
                ((ge - re).abs() < 0.01, format!("{name} evolving {ge:.2}")),
            ]
        })
        .collect();
    Verdict::new(checks)
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("scratch dir");
    let control_root = scratch.path().join("control");
    let image_root = scratch.path().join("image");
    let mut verdicts: BTreeMap<u8, (&str, Verdict)> = BTreeMap::new();

    verdicts.insert(7, ("reduction arithmetic", reduction_table_criterion()));
    verdicts.insert(5, ("numerical invariants", numerical_criterion()));

    eprintln!("control runs: {} seeds", CONTROL_SEEDS.len());
    let control = run_all(&control_root, &CONTROL_ENVS, &Method::ALL, &CONTROL_SEEDS);
    verdicts.insert(1, ("mountain car coverage", coverage_criterion(&control)));
    verdicts.insert(2, ("stochastic mountain car", stochastic_criterion(&control)));
    verdicts.insert(3, ("reduction ordering", reduction_criterion(&control)));

    verdicts.insert(6, ("determinism", determinism_criterion(&scratch.path().join("rerun"), &control_root)));

    eprintln!("image runs: {} seeds", IMAGE_SEEDS.len());
    let image = run_all(&image_root, &[EnvId::StochasticImage], &IMAGE_METHODS, &IMAGE_SEEDS);
    verdicts.insert(4, ("stochastic image ratios", image_criterion(&image)));

    let mut all = true;
    for (id, (name, v)) in &verdicts {
        all &= v.pass;
        println!("criterion {id} {name}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
