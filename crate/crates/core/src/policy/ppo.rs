use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::actor_critic::{gaussian_log_prob, ActorCritic};
use super::buffer::RolloutBuffer;
use crate::diffnum::{Tape, HALF_LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub epochs: usize,
    pub minibatches: usize,
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            minibatches: 32,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.001,
            gamma: 0.99,
            lambda: 0.95,
        }
    }
}

/// Averages over all minibatch steps of one update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Largest `|ratio - 1|` seen on the very first minibatch.
    pub first_ratio_deviation: f64,
}

/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Splits a shuffled `0..n` into `k` nearly equal chunks.
pub fn minibatch_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let k = k.clamp(1, n.max(1));
    let size = n.div_ceil(k);
    idx.chunks(size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Clipped-surrogate PPO over `epochs x minibatches` Adam steps.
pub fn ppo_update<R: Rng + ?Sized>(
    ac: &mut ActorCritic,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    if buf.is_empty() || buf.advantages.len() != buf.len() {
        return Err(Error::Contract("ppo_update needs a rollout with computed advantages".into()));
    }
    let mut stats = PpoStats::default();
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        for (mb_i, idx) in minibatch_indices(buf.len(), cfg.minibatches, rng).into_iter().enumerate() {
            let data = buf.gather(&idx);
            let n = idx.len() as f64;
            let mut tape = Tape::new();
            let obs = tape.constant(data.obs);
            let act = tape.constant(data.actions);
            let mean = ac.policy.forward(&mut tape, obs)?;
            let log_std = tape.param(&ac.log_std);
            let lp = gaussian_log_prob(&mut tape, mean, log_std, act)?;
            let old = tape.constant(data.old_log_probs);
            let diff = tape.sub(lp, old)?;
            let ratio = tape.exp(diff);
            let adv = tape.constant(data.advantages);
            let surr1 = tape.mul(ratio, adv)?;
            let clipped = tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            let surr2 = tape.mul(clipped, adv)?;
            let surr = tape.min(surr1, surr2)?;
            let surr_mean = tape.mean(surr);
            let policy_loss = tape.neg(surr_mean);

            let v = ac.value.forward(&mut tape, obs)?;
            let ret = tape.constant(data.returns);
            let verr = tape.sub(v, ret)?;
            let vsq = tape.square(verr);
            let value_loss = tape.mean(vsq);

            let ls_sum = tape.sum(log_std);
            let dim = ac.config().action_dim as f64;
            let entropy = tape.offset(ls_sum, dim * (0.5 + HALF_LN_2PI));

            let vterm = tape.scale(value_loss, cfg.value_coef);
            let eterm = tape.scale(entropy, -cfg.entropy_coef);
            let partial = tape.add(policy_loss, vterm)?;
            let loss = tape.add(partial, eterm)?;

            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "ppo loss {loss_value} at epoch {epoch}, minibatch {mb_i}"
                )));
            }
            let ratios = tape.value(ratio);
            if steps == 0 {
                stats.first_ratio_deviation = ratios.as_slice().iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
            }
            stats.clip_fraction +=
                ratios.as_slice().iter().filter(|r| (*r - 1.0).abs() > cfg.clip).count() as f64 / n;
            stats.policy_loss += tape.value(policy_loss).item();
            stats.value_loss += tape.value(value_loss).item();
            stats.entropy += tape.value(entropy).item();

            let grads = tape.backward(loss)?;
            let mut params = ac.policy.params_mut();
            params.push(&mut ac.log_std);
            params.extend(ac.value.params_mut());
            for p in params.iter_mut() {
                grads.accumulate_into(p);
            }
            ac.opt.step(&mut params)?;
            steps += 1;
        }
    }
    let k = steps.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    Ok(stats)
}
