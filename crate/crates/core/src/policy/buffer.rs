use crate::diffnum::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_HORIZON: usize = 2048;

/// `r = eta_e * r_e + eta_i * r_i`.
pub fn combine_rewards(r_e: f64, r_i: f64, eta_e: f64, eta_i: f64) -> f64 {
    eta_e * r_e + eta_i * r_i
}

/// GAE(gamma, lambda). `dones[t]` marks that the episode ended after step `t`,
/// so step `t` does not bootstrap from `values[t + 1]`. `last_value` bootstraps
/// the final step when it is not done. Returns raw advantages and return targets.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n || dones.len() != n {
        return Err(Error::shape("gae", n, values.len().min(dones.len())));
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * mask - values[t];
        running = delta + gamma * lambda * mask * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts to zero mean and scales to unit population std (std floored at 1e-8).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// One rollout of policy experience.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    obs_dim: usize,
    action_dim: usize,
    /// Observations as seen by the policy (normalized).
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub external_rewards: Vec<f64>,
    pub intrinsic_rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            obs_dim,
            action_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], log_prob: f64, value: f64, r_e: f64, done: bool) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::shape("rollout obs", self.obs_dim, obs.len()));
        }
        if action.len() != self.action_dim {
            return Err(Error::shape("rollout action", self.action_dim, action.len()));
        }
        self.obs.extend_from_slice(obs);
        self.actions.extend_from_slice(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.external_rewards.push(r_e);
        self.intrinsic_rewards.push(0.0);
        self.dones.push(done);
        Ok(())
    }

    pub fn clear(&mut self) {
        *self = Self::new(self.obs_dim, self.action_dim);
    }

    pub fn obs_row(&self, t: usize) -> &[f64] {
        &self.obs[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn action_row(&self, t: usize) -> &[f64] {
        &self.actions[t * self.action_dim..(t + 1) * self.action_dim]
    }

    /// Fills advantages (normalized) and return targets from the given per-step rewards.
    pub fn compute_advantages(&mut self, rewards: &[f64], last_value: f64, gamma: f64, lambda: f64) -> Result<()> {
        let (mut adv, ret) = gae(rewards, &self.values, &self.dones, last_value, gamma, lambda)?;
        normalize_advantages(&mut adv);
        if let Some(i) = adv.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("advantage at step {i}")));
        }
        self.advantages = adv;
        self.returns = ret;
        Ok(())
    }

    pub(crate) fn gather(&self, idx: &[usize]) -> MinibatchData {
        let mut o = Vec::with_capacity(idx.len() * self.obs_dim);
        let mut a = Vec::with_capacity(idx.len() * self.action_dim);
        for &i in idx {
            o.extend_from_slice(self.obs_row(i));
            a.extend_from_slice(self.action_row(i));
        }
        let col = |v: &[f64]| Matrix::from_vec(idx.len(), 1, idx.iter().map(|&i| v[i]).collect());
        MinibatchData {
            obs: Matrix::from_vec(idx.len(), self.obs_dim, o),
            actions: Matrix::from_vec(idx.len(), self.action_dim, a),
            old_log_probs: col(&self.log_probs),
            advantages: col(&self.advantages),
            returns: col(&self.returns),
        }
    }
}

pub(crate) struct MinibatchData {
    pub obs: Matrix,
    pub actions: Matrix,
    pub old_log_probs: Matrix,
    pub advantages: Matrix,
    pub returns: Matrix,
}
