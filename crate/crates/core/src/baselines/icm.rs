use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::diffnum::{Activation, Adam, AdamConfig, Init, Mlp, ParamTensor, Tape, Var};
use crate::error::Result;
use crate::transition::{check_batch, check_finite, named, named_mut, CuriosityModel, TransitionBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcmConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub adam: AdamConfig,
}

impl IcmConfig {
    /// Feature size equals state size.
    pub fn control(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            feature_dim: state_dim,
            hidden: 32,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcmLosses {
    pub forward: f64,
    pub inverse: f64,
}

impl IcmLosses {
    pub fn total(&self) -> f64 {
        self.forward + self.inverse
    }
}

/// Forward/inverse dynamics in a learned feature space.
///
/// The forward loss sees detached features, so the feature network is shaped
/// by the inverse-dynamics loss alone.
#[derive(Debug, Clone)]
pub struct IcmModel {
    cfg: IcmConfig,
    features: Mlp,
    forward: Mlp,
    inverse: Mlp,
    opt: Adam,
}

struct IcmGraph {
    forward_loss: Var,
    inverse_loss: Var,
    per_row_error: Var,
}

impl IcmModel {
    pub fn new<R: rand::Rng + ?Sized>(cfg: IcmConfig, rng: &mut R) -> Self {
        let (s, a, f, h) = (cfg.state_dim, cfg.action_dim, cfg.feature_dim, cfg.hidden);
        let features = Mlp::new(&[s, h, f], Activation::Relu, Init::FanInUniform, rng);
        let forward = Mlp::new(&[f + a, h, h, f], Activation::Relu, Init::FanInUniform, rng);
        let inverse = Mlp::new(&[2 * f, h, h, a], Activation::Relu, Init::FanInUniform, rng);
        let opt = Adam::new(cfg.adam);
        Self {
            cfg,
            features,
            forward,
            inverse,
            opt,
        }
    }

    pub fn config(&self) -> &IcmConfig {
        &self.cfg
    }

    pub fn feature_net(&self) -> &Mlp {
        &self.features
    }

    pub fn forward_net_mut(&mut self) -> &mut Mlp {
        &mut self.forward
    }

    pub fn feature_net_mut(&mut self) -> &mut Mlp {
        &mut self.features
    }

    pub fn inverse_net_mut(&mut self) -> &mut Mlp {
        &mut self.inverse
    }

    fn record(&self, tape: &mut Tape, batch: &TransitionBatch) -> Result<IcmGraph> {
        check_batch("icm", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let s = tape.constant(batch.states.clone());
        let a = tape.constant(batch.actions.clone());
        let n = tape.constant(batch.next_states.clone());
        let phi = self.features.forward(tape, s)?;
        let phi_next = self.features.forward(tape, n)?;

        let phi_d = tape.detach(phi);
        let phi_next_d = tape.detach(phi_next);
        let fwd_in = tape.concat(&[phi_d, a])?;
        let pred = self.forward.forward(tape, fwd_in)?;
        let err = tape.sub(pred, phi_next_d)?;
        let sq = tape.square(err);
        let per_row = tape.row_sum(sq);
        let per_row_error = tape.scale(per_row, 1.0 / self.cfg.feature_dim as f64);
        let forward_loss = tape.mean(per_row_error);

        // With an empty action there is nothing to invert and the features stay at their init.
        let inverse_loss = if self.cfg.action_dim == 0 {
            tape.constant(crate::diffnum::Matrix::scalar(0.0))
        } else {
            let inv_in = tape.concat(&[phi, phi_next])?;
            let a_hat = self.inverse.forward(tape, inv_in)?;
            let inv_err = tape.sub(a_hat, a)?;
            let inv_sq = tape.square(inv_err);
            tape.mean(inv_sq)
        };
        Ok(IcmGraph {
            forward_loss,
            inverse_loss,
            per_row_error,
        })
    }

    /// `|forward(f(s), a) - f(s')|^2 / feature_dim` per row.
    pub fn icm_rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let g = self.record(&mut tape, batch)?;
        Ok(tape.value(g.per_row_error).as_slice().to_vec())
    }

    pub fn losses(&self, batch: &TransitionBatch) -> Result<IcmLosses> {
        let mut tape = Tape::new();
        let g = self.record(&mut tape, batch)?;
        Ok(IcmLosses {
            forward: tape.value(g.forward_loss).item(),
            inverse: tape.value(g.inverse_loss).item(),
        })
    }

    /// One Adam step on forward + inverse loss; returns both pre-step losses.
    pub fn icm_train_step(&mut self, batch: &TransitionBatch) -> Result<IcmLosses> {
        let mut tape = Tape::new();
        let g = self.record(&mut tape, batch)?;
        let losses = IcmLosses {
            forward: check_finite("icm forward loss", tape.value(g.forward_loss).item())?,
            inverse: check_finite("icm inverse loss", tape.value(g.inverse_loss).item())?,
        };
        let total = tape.add(g.forward_loss, g.inverse_loss)?;
        let grads = tape.backward(total)?;
        let mut params = self.features.params_mut();
        params.extend(self.forward.params_mut());
        params.extend(self.inverse.params_mut());
        for p in params.iter_mut() {
            grads.accumulate_into(p);
        }
        self.opt.step(&mut params)?;
        Ok(losses)
    }
}

impl CuriosityModel for IcmModel {
    fn name(&self) -> &'static str {
        "icm"
    }

    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        self.icm_rewards(batch)
    }

    fn train_step(&mut self, batch: &TransitionBatch, _rng: &mut dyn RngCore) -> Result<f64> {
        Ok(self.icm_train_step(batch)?.total())
    }

    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut v = named("features", self.features.params());
        v.extend(named("forward", self.forward.params()));
        v.extend(named("inverse", self.inverse.params()));
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        let mut v = named_mut("features", self.features.params_mut());
        v.extend(named_mut("forward", self.forward.params_mut()));
        v.extend(named_mut("inverse", self.inverse.params_mut()));
        v
    }
}

/// Reward for one row computed from explicit features, for callers that
/// already hold `phi_hat` and `phi_next`.
pub fn feature_mse(phi_hat: &[f64], phi_next: &[f64]) -> f64 {
    let n = phi_hat.len().max(1) as f64;
    phi_hat
        .iter()
        .zip(phi_next)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: usize, seed: u64) -> TransitionBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TransitionBatch::new(
            crate::diffnum::standard_normal(rows, 2, &mut rng),
            crate::diffnum::standard_normal(rows, 1, &mut rng),
            crate::diffnum::standard_normal(rows, 2, &mut rng),
        )
        .unwrap()
    }

    #[test]
    fn mse_of_unit_gap() {
        assert_eq!(feature_mse(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn perfect_forward_prediction_gives_zero() {
        // Zero feature net -> phi = 0 everywhere; zero forward net predicts 0.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = IcmModel::new(IcmConfig::control(2, 1), &mut rng);
        for p in m.feature_net_mut().params_mut() {
            p.value.as_mut_slice().fill(0.0);
        }
        for p in m.forward_net_mut().params_mut() {
            p.value.as_mut_slice().fill(0.0);
        }
        let r = m.icm_rewards(&batch(5, 1)).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reward_is_per_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = IcmModel::new(IcmConfig::control(2, 1), &mut rng);
        let b = batch(6, 2);
        let r = m.icm_rewards(&b).unwrap();
        let rev: Vec<usize> = (0..6).rev().collect();
        let r_rev = m.icm_rewards(&b.select(&rev)).unwrap();
        for i in 0..6 {
            assert_eq!(r[i], r_rev[5 - i]);
        }
        assert!(r.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn forward_loss_does_not_touch_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = IcmModel::new(IcmConfig::control(2, 1), &mut rng);
        // Zero inverse net output layer and zero actions -> inverse loss is 0
        // with zero gradient, leaving only the detached forward loss.
        for p in m.inverse_net_mut().params_mut() {
            p.value.as_mut_slice().fill(0.0);
        }
        let mut b = batch(8, 3);
        b.actions = crate::diffnum::Matrix::zeros(8, 1);
        let before: Vec<Vec<f64>> = m.feature_net().params().iter().map(|p| p.value.as_slice().to_vec()).collect();
        let l = m.icm_train_step(&b).unwrap();
        assert_eq!(l.inverse, 0.0);
        assert!(l.forward > 0.0);
        let after: Vec<Vec<f64>> = m.feature_net().params().iter().map(|p| p.value.as_slice().to_vec()).collect();
        assert_eq!(before, after);
    }
}
