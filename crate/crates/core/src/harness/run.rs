use std::path::PathBuf;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, Method};
use super::record::RunRecord;
use crate::baselines::{EnsembleConfig, EnsembleModel, IcmConfig, IcmModel, RandomBonus, RndConfig, RndModel};
use crate::diffnum::{AdamConfig, Matrix};
use crate::envs::{sample_image_batch, transitions_to_batch, ControlEnv, EnvId, ImageDataset};
use crate::error::{Error, Result};
use crate::latent::{LbsConfig, LbsModel};
use crate::metrics::{normalize_state, reward_ratio, CoverageGrid, ReturnNormalizer, RunningMoments};
use crate::policy::{
    combine_rewards, minibatch_indices, ppo_update, uniform_action, ActorCritic, ActorCriticConfig, PpoConfig, RolloutBuffer,
};
use crate::transition::{CuriosityModel, TransitionBatch};

/// Environment variable naming the MNIST directory when the config has none.
pub const DATA_DIR_ENV: &str = "LBS_MNIST_DIR";

pub const MODEL_CHECKPOINT: &str = "model.ckpt";
pub const POLICY_CHECKPOINT: &str = "policy.ckpt";

/// Curiosity model for `cfg.method`.
pub fn build_model(
    cfg: &ExperimentConfig,
    state_dim: usize,
    action_dim: usize,
    rng: &mut dyn RngCore,
) -> Result<Box<dyn CuriosityModel>> {
    let adam = AdamConfig::with_lr(cfg.lr);
    Ok(match cfg.method {
        Method::Lbs => Box::new(LbsModel::new(
            LbsConfig {
                state_dim,
                action_dim,
                latent_dim: cfg.latent_dim,
                hidden: cfg.hidden,
                activation: cfg.activation,
                beta: cfg.beta,
                recon_std: cfg.recon_std,
                adam,
            },
            rng,
        )?),
        Method::Icm => Box::new(IcmModel::new(
            IcmConfig {
                state_dim,
                action_dim,
                feature_dim: cfg.icm_feature_dim,
                hidden: cfg.hidden,
                adam,
            },
            rng,
        )),
        Method::Rnd => Box::new(RndModel::new(
            RndConfig {
                state_dim,
                action_dim,
                feature_dim: cfg.rnd_feature_dim,
                hidden: cfg.hidden,
                adam,
            },
            rng,
        )),
        Method::Disagreement => Box::new(EnsembleModel::new(
            EnsembleConfig {
                state_dim,
                action_dim,
                members: cfg.ensemble_k,
                hidden: cfg.hidden,
                adam,
            },
            rng,
        )),
        Method::Random => Box::new(RandomBonus),
    })
}

struct Streams {
    init: ChaCha8Rng,
    act: ChaCha8Rng,
    train: ChaCha8Rng,
    eval: ChaCha8Rng,
    env_seed: u64,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut child = || ChaCha8Rng::seed_from_u64(master.next_u64());
        let (init, act, train, eval) = (child(), child(), child(), child());
        Self {
            init,
            act,
            train,
            eval,
            env_seed: master.next_u64(),
        }
    }
}

/// Runs one experiment. When `cfg.out_dir` is set, `progress.csv`,
/// `summary.json` and checkpoints are written there, including for runs that
/// fail part way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mut rec = RunRecord::new(cfg);
    let start = Instant::now();
    let mut ckpts = Vec::new();
    let res = if cfg.env.is_control() {
        run_control(cfg, &mut rec, &start, &mut ckpts)
    } else {
        run_image(cfg, &mut rec, &start, &mut ckpts)
    };
    rec.wall_clock_secs = start.elapsed().as_secs_f64();
    if let Err(e) = &res {
        log::error!("run failed: {e}");
        rec.failure = Some(e.to_string());
    }
    if let Some(dir) = &cfg.out_dir {
        rec.write(dir)?;
        for (name, c) in &ckpts {
            c.write(&dir.join(name))?;
        }
    }
    res.map(|_| rec)
}

fn model_checkpoint(hash: &str, model: &dyn CuriosityModel) -> Checkpoint {
    Checkpoint::from_params(hash, model.named_params())
}

fn rows_to_batch(states: &[Vec<f64>], actions: &[Vec<f64>], next: &[Vec<f64>]) -> Result<TransitionBatch> {
    let n = states.len();
    let flat = |v: &[Vec<f64>]| {
        let cols = v.first().map_or(0, Vec::len);
        Matrix::from_vec(n, cols, v.concat())
    };
    TransitionBatch::new(flat(states), flat(actions), flat(next))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn run_control(
    cfg: &ExperimentConfig,
    rec: &mut RunRecord,
    start: &Instant,
    ckpts: &mut Vec<(String, Checkpoint)>,
) -> Result<()> {
    let mut rng = Streams::new(cfg.seed);
    let mut env = ControlEnv::new(cfg.env, cfg.episode_len, rng.env_seed)?;
    let (obs_dim, action_dim) = (env.obs_dim(), env.action_dim());
    let random = cfg.method == Method::Random;
    let mut model = build_model(cfg, obs_dim, action_dim, &mut rng.init)?;
    let mut ac_cfg = ActorCriticConfig::new(obs_dim, action_dim);
    ac_cfg.hidden = cfg.policy_hidden;
    ac_cfg.log_std_init = cfg.log_std_init;
    ac_cfg.adam = AdamConfig {
        lr: cfg.lr,
        max_grad_norm: (cfg.max_grad_norm > 0.0).then_some(cfg.max_grad_norm),
        ..AdamConfig::default()
    };
    let mut ac = ActorCritic::new(ac_cfg, &mut rng.init)?;
    let ppo = PpoConfig {
        epochs: cfg.epochs,
        minibatches: cfg.minibatches,
        clip: cfg.clip,
        value_coef: cfg.value_coef,
        entropy_coef: cfg.entropy_coef,
        gamma: cfg.gamma,
        lambda: cfg.lambda,
    };

    let mut moments = RunningMoments::new(obs_dim);
    let mut ret_norm = ReturnNormalizer::new(cfg.gamma);
    let mut grid = CoverageGrid::mountain_car();
    let mut obs = env.observation();
    let mut step: u64 = 0;

    while step < cfg.steps {
        let horizon = (cfg.steps - step).min(cfg.horizon as u64) as usize;
        let mut buf = RolloutBuffer::new(obs_dim, action_dim);
        let mut raw_states = Vec::with_capacity(horizon);
        let mut raw_actions = Vec::with_capacity(horizon);
        let mut raw_next = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            grid.update(ControlEnv::coverage_point(&obs));
            moments.update(&obs)?;
            let nobs = normalize_state(&moments, &obs)?;
            let (action, log_prob, value) = if random {
                (uniform_action(action_dim, &mut rng.act), 0.0, 0.0)
            } else {
                let out = ac.act(&nobs, &mut rng.act)?;
                (out.action, out.log_prob, out.value)
            };
            let applied: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
            let st = env.step(&applied)?;
            grid.update(ControlEnv::coverage_point(&st.obs));
            buf.push(&nobs, &action, log_prob, value, st.reward, st.done)?;
            raw_states.push(obs);
            raw_actions.push(applied);
            raw_next.push(st.obs.clone());
            obs = if st.done { env.observation() } else { st.obs };
        }
        step += horizon as u64;

        let mut metrics = vec![("coverage".to_string(), grid.percent())];
        if action_dim > 1 {
            let pressed = raw_actions.iter().filter(|a| a[1] > 0.0).count();
            metrics.push(("remote_rate".to_string(), pressed as f64 / horizon as f64));
        }
        if !random {
            let norm = |rows: &[Vec<f64>]| rows.iter().map(|r| normalize_state(&moments, r)).collect::<Result<Vec<_>>>();
            let batch = rows_to_batch(&norm(&raw_states)?, &raw_actions, &norm(&raw_next)?)?;
            let r_i = model.rewards(&batch)?;
            if let Some(i) = r_i.iter().position(|r| !r.is_finite()) {
                return Err(Error::NonFinite(format!("intrinsic reward at rollout step {i}")));
            }
            buf.intrinsic_rewards.clone_from(&r_i);
            let rewards: Vec<f64> = buf
                .external_rewards
                .iter()
                .zip(&r_i)
                .zip(&buf.dones)
                .map(|((&e, &i), &d)| ret_norm.normalize(combine_rewards(e, i, cfg.eta_e, cfg.eta_i), d))
                .collect();
            let last_value = ac.state_value(&normalize_state(&moments, &obs)?)?;
            buf.compute_advantages(&rewards, last_value, cfg.gamma, cfg.lambda)?;
            let stats = ppo_update(&mut ac, &buf, &ppo, &mut rng.train)?;

            let mut model_loss = 0.0;
            let mut n_updates = 0usize;
            for _ in 0..cfg.epochs {
                for idx in minibatch_indices(batch.len(), cfg.minibatches, &mut rng.train) {
                    model_loss += model.train_step(&batch.select(&idx), &mut rng.train)?;
                    n_updates += 1;
                }
            }
            metrics.extend([
                ("intrinsic_reward".to_string(), mean(&r_i)),
                ("model_loss".to_string(), model_loss / n_updates.max(1) as f64),
                ("policy_loss".to_string(), stats.policy_loss),
                ("value_loss".to_string(), stats.value_loss),
                ("entropy".to_string(), stats.entropy),
            ]);
        }
        log::debug!("{} {} step {step}: coverage {:.1}%", cfg.env, cfg.method, grid.percent());
        rec.push(step, metrics, start.elapsed().as_secs_f64());
    }
    if !random {
        ckpts.push((MODEL_CHECKPOINT.into(), model_checkpoint(&rec.config_hash, model.as_ref())));
        ckpts.push((POLICY_CHECKPOINT.into(), Checkpoint::from_params(&rec.config_hash, ac.named_params())));
    }
    Ok(())
}

/// Dataset directory from the config, falling back to [`DATA_DIR_ENV`].
pub fn resolve_data_dir(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

fn run_image(
    cfg: &ExperimentConfig,
    rec: &mut RunRecord,
    start: &Instant,
    ckpts: &mut Vec<(String, Checkpoint)>,
) -> Result<()> {
    debug_assert_eq!(cfg.env, EnvId::StochasticImage);
    let mut rng = Streams::new(cfg.seed);
    // The dataset depends only on the directory, never on the run seed.
    let mut data_rng = ChaCha8Rng::seed_from_u64(0x5eed_da7a);
    let mut ds = ImageDataset::load_or_synthetic(resolve_data_dir(cfg).as_deref(), cfg.downsample, &mut data_rng)?;
    if cfg.standardize {
        ds = ds.standardized();
    }
    rec.dataset_source = Some(
        match ds.source() {
            crate::envs::DatasetSource::Mnist => "mnist",
            crate::envs::DatasetSource::SyntheticGlyphs => "synthetic-glyphs",
        }
        .into(),
    );
    let mut model = build_model(cfg, ds.pixels(), 0, &mut rng.init)?;
    let evaluate = |model: &dyn CuriosityModel, eval: &mut ChaCha8Rng, loss: Option<f64>| -> Result<Vec<(String, f64)>> {
        let r = reward_ratio(model, &ds, eval, cfg.n_eval)?;
        let mut m = vec![
            ("reward_ratio".to_string(), r.ratio),
            ("reward_stochastic".to_string(), r.stochastic),
            ("reward_deterministic".to_string(), r.deterministic),
        ];
        if let Some(l) = loss {
            m.push(("model_loss".to_string(), l));
        }
        Ok(m)
    };
    rec.push(0, evaluate(model.as_ref(), &mut rng.eval, None)?, start.elapsed().as_secs_f64());
    let mut loss_acc = 0.0;
    let mut loss_n = 0usize;
    for b in 1..=cfg.steps {
        let batch = transitions_to_batch(&sample_image_batch(&ds, &mut rng.train, cfg.batch_size)?)?;
        loss_acc += model.train_step(&batch, &mut rng.train)?;
        loss_n += 1;
        if b % cfg.ratio_every == 0 || b == cfg.steps {
            let m = evaluate(model.as_ref(), &mut rng.eval, Some(loss_acc / loss_n as f64))?;
            (loss_acc, loss_n) = (0.0, 0);
            rec.push(b, m, start.elapsed().as_secs_f64());
        }
    }
    ckpts.push((MODEL_CHECKPOINT.into(), model_checkpoint(&rec.config_hash, model.as_ref())));
    Ok(())
}
