use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffnum::{Activation, Adam, AdamConfig, Init, Matrix, Mlp, ParamTensor, Tape, Var, HALF_LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
    pub log_std_init: f64,
    pub adam: AdamConfig,
}

impl ActorCriticConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            obs_dim,
            action_dim,
            hidden: 64,
            log_std_init: 0.0,
            adam: AdamConfig {
                max_grad_norm: Some(0.5),
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput {
    /// Unclamped sample; clamp to the action box before stepping the env.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
}

/// Gaussian policy with a state-conditioned mean and a global learned log-std,
/// plus a separate value network.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    cfg: ActorCriticConfig,
    pub(crate) policy: Mlp,
    pub(crate) log_std: ParamTensor,
    pub(crate) value: Mlp,
    pub(crate) opt: Adam,
}

/// Per-row log-density of `a` under `N(mean, exp(log_std))`, as an `n x 1` node.
pub fn gaussian_log_prob(tape: &mut Tape, mean: Var, log_std: Var, a: Var) -> Result<Var> {
    let dim = tape.shape(mean).1;
    let diff = tape.sub(a, mean)?;
    let neg_ls = tape.neg(log_std);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul_row(diff, inv_std)?;
    let z2 = tape.square(z);
    let quad = tape.row_sum(z2);
    let quad = tape.scale(quad, -0.5);
    let ls_sum = tape.sum(log_std);
    let neg_ls_sum = tape.neg(ls_sum);
    let lp = tape.add_row(quad, neg_ls_sum)?;
    Ok(tape.offset(lp, -HALF_LN_2PI * dim as f64))
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(cfg: ActorCriticConfig, rng: &mut R) -> Result<Self> {
        if cfg.obs_dim == 0 || cfg.action_dim == 0 || cfg.hidden == 0 {
            return Err(Error::Config("actor-critic dimensions must be positive".into()));
        }
        let gain = std::f64::consts::SQRT_2;
        let h = cfg.hidden;
        let policy = Mlp::new(
            &[cfg.obs_dim, h, h, cfg.action_dim],
            Activation::Relu,
            Init::Orthogonal {
                hidden_gain: gain,
                output_gain: 0.01,
            },
            rng,
        );
        let value = Mlp::new(
            &[cfg.obs_dim, h, h, 1],
            Activation::Relu,
            Init::Orthogonal {
                hidden_gain: gain,
                output_gain: 1.0,
            },
            rng,
        );
        Ok(Self {
            cfg,
            policy,
            log_std: ParamTensor::new(Matrix::filled(1, cfg.action_dim, cfg.log_std_init)),
            value,
            opt: Adam::new(cfg.adam),
        })
    }

    pub fn config(&self) -> &ActorCriticConfig {
        &self.cfg
    }

    pub fn policy_net(&self) -> &Mlp {
        &self.policy
    }

    pub fn policy_net_mut(&mut self) -> &mut Mlp {
        &mut self.policy
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value
    }

    pub fn log_std(&self) -> &[f64] {
        self.log_std.value.as_slice()
    }

    pub fn action_std(&self) -> Vec<f64> {
        self.log_std().iter().map(|l| l.exp()).collect()
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.policy.forward_vec(obs)
    }

    pub fn state_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value.forward_vec(obs)?[0])
    }

    /// Closed-form log-density of `action` under the policy at `obs`.
    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.cfg.action_dim {
            return Err(Error::shape("log_prob action", self.cfg.action_dim, action.len()));
        }
        let mean = self.mean_action(obs)?;
        Ok(mean
            .iter()
            .zip(action)
            .zip(self.log_std())
            .map(|((m, a), ls)| {
                let z = (a - m) * (-ls).exp();
                -0.5 * z * z - ls - HALF_LN_2PI
            })
            .sum())
    }

    /// Entropy of the action distribution (state independent).
    pub fn entropy(&self) -> f64 {
        self.log_std().iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
    }

    /// Samples an action for a normalized observation.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<ActOutput> {
        let mean = self.mean_action(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std())
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let log_prob = self.log_prob(obs, &action)?;
        let value = self.state_value(obs)?;
        Ok(ActOutput {
            action,
            log_prob,
            value,
        })
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut v = self.policy.params();
        v.push(&self.log_std);
        v.extend(self.value.params());
        v
    }

    pub fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut out: Vec<(String, &ParamTensor)> = self
            .policy
            .params()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (format!("policy.{i}"), p))
            .collect();
        out.push(("policy.log_std".into(), &self.log_std));
        out.extend(
            self.value
                .params()
                .into_iter()
                .enumerate()
                .map(|(i, p)| (format!("value.{i}"), p)),
        );
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        let mut out: Vec<(String, &mut ParamTensor)> = self
            .policy
            .params_mut()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (format!("policy.{i}"), p))
            .collect();
        out.push(("policy.log_std".into(), &mut self.log_std));
        out.extend(
            self.value
                .params_mut()
                .into_iter()
                .enumerate()
                .map(|(i, p)| (format!("value.{i}"), p)),
        );
        out
    }
}

/// Uniform policy over the `[-1, 1]` action box, used by the random baseline.
pub fn uniform_action<R: Rng + ?Sized>(action_dim: usize, rng: &mut R) -> Vec<f64> {
    (0..action_dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_policy() -> ActorCritic {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ac = ActorCritic::new(ActorCriticConfig::new(2, 1), &mut rng).unwrap();
        for p in ac.policy.params_mut() {
            p.value = Matrix::zeros(p.value.rows(), p.value.cols());
        }
        ac
    }

    #[test]
    fn log_prob_at_mean() {
        let ac = zero_policy();
        assert!((ac.log_prob(&[0.3, -0.2], &[0.0]).unwrap() + 0.918939).abs() < 1e-6);
        assert!((ac.entropy() - 1.418939).abs() < 1e-6);
    }

    #[test]
    fn tape_log_prob_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ac = ActorCritic::new(ActorCriticConfig::new(3, 2), &mut rng).unwrap();
        let obs = [[0.1, -0.4, 1.2], [2.0, 0.0, -1.0]];
        let acts = [[0.5, -0.3], [-1.5, 0.9]];
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&obs));
        let a = tape.constant(Matrix::from_rows(&acts));
        let mean = ac.policy.forward(&mut tape, x).unwrap();
        let ls = tape.param(&ac.log_std);
        let lp = gaussian_log_prob(&mut tape, mean, ls, a).unwrap();
        for i in 0..2 {
            let want = ac.log_prob(&obs[i], &acts[i]).unwrap();
            assert!((tape.value(lp).get(i, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mean_sampling_is_symmetric() {
        let ac = zero_policy();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| ac.act(&[0.0, 0.0], &mut rng).unwrap().action[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn act_is_reproducible() {
        let ac = zero_policy();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| ac.act(&[0.1, 0.2], &mut rng).unwrap().action[0]).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn uniform_actions_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let a = uniform_action(2, &mut rng);
            assert!(a.iter().all(|x| (-1.0..=1.0).contains(x)));
            sums[0] += a[0];
            sums[1] += a[1];
        }
        let sigma = (1.0f64 / 3.0).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < 3.0 * sigma / (n as f64).sqrt());
        }
    }
}
