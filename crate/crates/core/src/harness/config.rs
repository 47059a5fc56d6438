use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffnum::Activation;
use crate::envs::EnvId;
use crate::error::{Error, Result};
use crate::latent::ReconStd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Lbs,
    Icm,
    Rnd,
    Disagreement,
    Random,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Lbs, Method::Icm, Method::Rnd, Method::Disagreement, Method::Random];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Lbs => "lbs",
            Method::Icm => "icm",
            Method::Rnd => "rnd",
            Method::Disagreement => "disagreement",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Every knob of a run. Build with [`ExperimentConfig::new`] to get the
/// per-environment defaults, then override individual keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvId,
    pub method: Method,
    /// Environment steps for control tasks, training batches for the image task.
    pub steps: u64,
    pub seed: u64,
    pub lr: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub horizon: usize,
    pub minibatches: usize,
    pub epochs: usize,
    pub hidden: usize,
    pub policy_hidden: usize,
    /// Initial log-std of the Gaussian policy.
    pub log_std_init: f64,
    pub latent_dim: usize,
    pub ensemble_k: usize,
    pub eta_e: f64,
    pub eta_i: f64,
    pub episode_len: usize,
    /// Global gradient-norm clip for the policy; 0 disables it.
    pub max_grad_norm: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub recon_std: ReconStd,
    pub activation: Activation,
    pub icm_feature_dim: usize,
    pub rnd_feature_dim: usize,
    pub batch_size: usize,
    pub ratio_every: u64,
    pub n_eval: usize,
    pub downsample: bool,
    /// Standardize image pixels with the dataset-wide mean and std.
    pub standardize: bool,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Keys accepted in config files, in documentation order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("env", "mountain-car | smc-frozen | smc-evolving | stochastic-image"),
    ("method", "lbs | icm | rnd | disagreement | random"),
    ("steps", "environment steps (control) or training batches (image)"),
    ("seed", "seed of the single run generator"),
    ("lr", "Adam learning rate for policy and curiosity model"),
    ("beta", "KL weight of the latent model bound"),
    ("gamma", "discount"),
    ("lambda", "GAE lambda"),
    ("clip", "PPO ratio clip"),
    ("horizon", "steps per rollout"),
    ("minibatches", "minibatches per epoch"),
    ("epochs", "passes over each rollout"),
    ("hidden", "hidden width of curiosity models"),
    ("policy_hidden", "hidden width of policy and value nets"),
    ("log_std_init", "initial log-std of the policy"),
    ("latent_dim", "latent size of the LBS model"),
    ("ensemble_k", "disagreement ensemble size"),
    ("eta_e", "weight of the external reward"),
    ("eta_i", "weight of the intrinsic reward"),
    ("episode_len", "control episode timeout"),
    ("max_grad_norm", "policy gradient-norm clip, 0 disables"),
    ("value_coef", "PPO value loss weight"),
    ("entropy_coef", "PPO entropy bonus weight"),
    ("recon_std", "learned | unit"),
    ("activation", "relu | leaky-relu"),
    ("icm_feature_dim", "ICM feature size"),
    ("rnd_feature_dim", "RND feature size"),
    ("batch_size", "image-task batch size"),
    ("ratio_every", "batches between reward-ratio evaluations"),
    ("n_eval", "transitions per source class in a ratio evaluation"),
    ("downsample", "true to pool 28x28 images down to 14x14"),
    ("standardize", "true to standardize image pixels with fixed dataset statistics"),
    ("data_dir", "directory holding the MNIST test IDX files"),
    ("out_dir", "output directory"),
];

/// Keys that do not change what a run computes and are left out of the hash.
const UNHASHED: &[&str] = &["seed", "data_dir", "out_dir"];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

impl ExperimentConfig {
    pub fn new(env: EnvId, method: Method) -> Self {
        let control = env.is_control();
        let state_dim = match env {
            EnvId::MountainCar => 2,
            EnvId::SmcFrozen | EnvId::SmcEvolving => 3,
            EnvId::StochasticImage => 196,
        };
        Self {
            env,
            method,
            steps: if control { 200_000 } else { 50_000 },
            seed: 0,
            lr: 3e-4,
            beta: if env == EnvId::MountainCar { 0.1 } else { 2.0 },
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            horizon: 2048,
            minibatches: 32,
            epochs: 10,
            hidden: if control { 32 } else { 64 },
            policy_hidden: 64,
            log_std_init: -1.5,
            latent_dim: if control { state_dim } else { 32 },
            ensemble_k: 5,
            eta_e: 0.0,
            eta_i: 1.0,
            episode_len: 1000,
            max_grad_norm: 0.5,
            value_coef: 0.5,
            entropy_coef: 0.001,
            recon_std: ReconStd::Learned,
            activation: if control { Activation::Relu } else { Activation::LeakyRelu },
            icm_feature_dim: if control { state_dim } else { 32 },
            rnd_feature_dim: if control { 16 } else { 32 },
            batch_size: 128,
            ratio_every: 100,
            n_eval: 512,
            downsample: true,
            standardize: false,
            data_dir: None,
            out_dir: None,
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "env" => {
                let env: EnvId = v.parse()?;
                if env != self.env {
                    return Err(Error::Config(format!(
                        "env `{env}` conflicts with `{}`; start from the matching defaults",
                        self.env
                    )));
                }
            }
            "method" => self.method = v.parse()?,
            "steps" => self.steps = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "beta" => self.beta = parse_num(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "clip" => self.clip = parse_num(key, v)?,
            "horizon" => self.horizon = parse_num(key, v)?,
            "minibatches" => self.minibatches = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "hidden" => self.hidden = parse_num(key, v)?,
            "policy_hidden" => self.policy_hidden = parse_num(key, v)?,
            "log_std_init" => self.log_std_init = parse_num(key, v)?,
            "latent_dim" => self.latent_dim = parse_num(key, v)?,
            "ensemble_k" => self.ensemble_k = parse_num(key, v)?,
            "eta_e" => self.eta_e = parse_num(key, v)?,
            "eta_i" => self.eta_i = parse_num(key, v)?,
            "episode_len" => self.episode_len = parse_num(key, v)?,
            "max_grad_norm" => self.max_grad_norm = parse_num(key, v)?,
            "value_coef" => self.value_coef = parse_num(key, v)?,
            "entropy_coef" => self.entropy_coef = parse_num(key, v)?,
            "recon_std" => {
                self.recon_std = match v {
                    "learned" => ReconStd::Learned,
                    "unit" => ReconStd::Unit,
                    _ => return Err(Error::Config(format!("`recon_std`: expected learned or unit, got `{v}`"))),
                }
            }
            "activation" => {
                self.activation = match v {
                    "relu" => Activation::Relu,
                    "leaky-relu" => Activation::LeakyRelu,
                    _ => return Err(Error::Config(format!("`activation`: expected relu or leaky-relu, got `{v}`"))),
                }
            }
            "icm_feature_dim" => self.icm_feature_dim = parse_num(key, v)?,
            "rnd_feature_dim" => self.rnd_feature_dim = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "ratio_every" => self.ratio_every = parse_num(key, v)?,
            "n_eval" => self.n_eval = parse_num(key, v)?,
            "downsample" => self.downsample = parse_bool(key, v)?,
            "standardize" => self.standardize = parse_bool(key, v)?,
            "data_dir" => self.data_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            "out_dir" => self.out_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Builds a config from ordered key/value pairs. `env` and `method` are
    /// taken from the pairs (last occurrence wins) and select the defaults.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let last = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.trim());
        let env: EnvId = last("env")
            .ok_or_else(|| Error::Config("missing `env`".into()))?
            .parse()?;
        let method: Method = last("method")
            .ok_or_else(|| Error::Config("missing `method`".into()))?
            .parse()?;
        let mut cfg = Self::new(env, method);
        for (k, v) in pairs {
            if k != "env" {
                cfg.set(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steps", self.steps as usize),
            ("horizon", self.horizon),
            ("minibatches", self.minibatches),
            ("epochs", self.epochs),
            ("hidden", self.hidden),
            ("policy_hidden", self.policy_hidden),
            ("latent_dim", self.latent_dim),
            ("ensemble_k", self.ensemble_k),
            ("episode_len", self.episode_len),
            ("icm_feature_dim", self.icm_feature_dim),
            ("rnd_feature_dim", self.rnd_feature_dim),
            ("batch_size", self.batch_size),
            ("ratio_every", self.ratio_every as usize),
            ("n_eval", self.n_eval),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if self.beta < 0.0 {
            return Err(Error::Config("`beta` must be nonnegative".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::Config("`lr` must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config("`gamma` and `lambda` must lie in [0, 1]".into()));
        }
        if !self.log_std_init.is_finite() {
            return Err(Error::Config("`log_std_init` must be finite".into()));
        }
        if self.max_grad_norm < 0.0 {
            return Err(Error::Config("`max_grad_norm` must be nonnegative".into()));
        }
        if self.env == EnvId::StochasticImage && self.method == Method::Random {
            log::warn!("random has no reward signal; its reward ratio is undefined");
        }
        Ok(())
    }

    /// `key=value` lines, sorted by key.
    pub fn canonical_text(&self) -> String {
        let mut pairs = self.pairs();
        pairs.sort();
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// All keys with their current values, in documentation order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky-relu",
        };
        let recon = match self.recon_std {
            ReconStd::Learned => "learned",
            ReconStd::Unit => "unit",
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values: Vec<String> = vec![
            self.env.to_string(),
            self.method.to_string(),
            self.steps.to_string(),
            self.seed.to_string(),
            format!("{:?}", self.lr),
            format!("{:?}", self.beta),
            format!("{:?}", self.gamma),
            format!("{:?}", self.lambda),
            format!("{:?}", self.clip),
            self.horizon.to_string(),
            self.minibatches.to_string(),
            self.epochs.to_string(),
            self.hidden.to_string(),
            self.policy_hidden.to_string(),
            format!("{:?}", self.log_std_init),
            self.latent_dim.to_string(),
            self.ensemble_k.to_string(),
            format!("{:?}", self.eta_e),
            format!("{:?}", self.eta_i),
            self.episode_len.to_string(),
            format!("{:?}", self.max_grad_norm),
            format!("{:?}", self.value_coef),
            format!("{:?}", self.entropy_coef),
            recon.to_string(),
            act.to_string(),
            self.icm_feature_dim.to_string(),
            self.rnd_feature_dim.to_string(),
            self.batch_size.to_string(),
            self.ratio_every.to_string(),
            self.n_eval.to_string(),
            self.downsample.to_string(),
            self.standardize.to_string(),
            path(&self.data_dir),
            path(&self.out_dir),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|((k, _), v)| (k.to_string(), v))
            .collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical text, ignoring
    /// seed and paths.
    pub fn hash(&self) -> String {
        let mut pairs = self.pairs();
        pairs.retain(|(k, _)| !UNHASHED.contains(&k.as_str()));
        pairs.sort();
        let mut h = Sha256::new();
        for (k, v) in pairs {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses flat `key = value` text; `#` starts a comment, blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let known: Vec<&str> = CONFIG_KEYS.iter().map(|(k, _)| *k).collect();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if !known.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown config key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}
