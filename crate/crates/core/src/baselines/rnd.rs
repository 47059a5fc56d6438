use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::diffnum::{Activation, Adam, AdamConfig, Init, Mlp, ParamTensor, Tape, Var};
use crate::error::Result;
use crate::transition::{check_batch, check_finite, named, named_mut, CuriosityModel, TransitionBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RndConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub adam: AdamConfig,
}

impl RndConfig {
    pub fn control(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            feature_dim: 16,
            hidden: 32,
            adam: AdamConfig::default(),
        }
    }
}

/// Distillation of a frozen random network; the error depends on `s'` only.
#[derive(Debug, Clone)]
pub struct RndModel {
    cfg: RndConfig,
    target: Mlp,
    predictor: Mlp,
    opt: Adam,
}

impl RndModel {
    pub fn new<R: rand::Rng + ?Sized>(cfg: RndConfig, rng: &mut R) -> Self {
        let (s, f, h) = (cfg.state_dim, cfg.feature_dim, cfg.hidden);
        let target = Mlp::new(
            &[s, h, h, f],
            Activation::Relu,
            Init::Orthogonal {
                hidden_gain: 2f64.sqrt(),
                output_gain: 1.0,
            },
            rng,
        );
        let predictor = Mlp::new(&[s, h, h, f], Activation::Relu, Init::FanInUniform, rng);
        let opt = Adam::new(cfg.adam);
        Self {
            cfg,
            target,
            predictor,
            opt,
        }
    }

    pub fn config(&self) -> &RndConfig {
        &self.cfg
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target
    }

    pub fn predictor_net_mut(&mut self) -> &mut Mlp {
        &mut self.predictor
    }

    /// Makes the predictor an exact copy of the target.
    pub fn copy_target_into_predictor(&mut self) {
        for (p, t) in self.predictor.params_mut().into_iter().zip(self.target.params()) {
            p.value = t.value.clone();
        }
    }

    fn record(&self, tape: &mut Tape, batch: &TransitionBatch) -> Result<Var> {
        check_batch("rnd", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let n = tape.constant(batch.next_states.clone());
        let target = self.target.forward(tape, n)?;
        let target = tape.detach(target);
        let pred = self.predictor.forward(tape, n)?;
        let err = tape.sub(pred, target)?;
        let sq = tape.square(err);
        let per_row = tape.row_sum(sq);
        Ok(tape.scale(per_row, 1.0 / self.cfg.feature_dim as f64))
    }

    pub fn rnd_rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let r = self.record(&mut tape, batch)?;
        Ok(tape.value(r).as_slice().to_vec())
    }

    /// One Adam step on the predictor; the target stays frozen.
    pub fn rnd_train_step(&mut self, batch: &TransitionBatch) -> Result<f64> {
        let mut tape = Tape::new();
        let per_row = self.record(&mut tape, batch)?;
        let loss = tape.mean(per_row);
        let value = check_finite("rnd loss", tape.value(loss).item())?;
        let grads = tape.backward(loss)?;
        let mut params = self.predictor.params_mut();
        for p in params.iter_mut() {
            grads.accumulate_into(p);
        }
        self.opt.step(&mut params)?;
        Ok(value)
    }

    fn all_params(&self) -> Vec<&ParamTensor> {
        let mut v = self.target.params();
        v.extend(self.predictor.params());
        v
    }
}

impl CuriosityModel for RndModel {
    fn name(&self) -> &'static str {
        "rnd"
    }

    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        self.rnd_rewards(batch)
    }

    fn train_step(&mut self, batch: &TransitionBatch, _rng: &mut dyn RngCore) -> Result<f64> {
        self.rnd_train_step(batch)
    }

    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let n = self.target.params().len();
        let all = self.all_params();
        let (t, p) = all.split_at(n);
        let mut v = named("target", t.to_vec());
        v.extend(named("predictor", p.to_vec()));
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        let mut v = named_mut("target", self.target.params_mut());
        v.extend(named_mut("predictor", self.predictor.params_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnum::{standard_normal, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: usize, seed: u64) -> TransitionBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TransitionBatch::new(
            standard_normal(rows, 2, &mut rng),
            standard_normal(rows, 1, &mut rng),
            standard_normal(rows, 2, &mut rng),
        )
        .unwrap()
    }

    #[test]
    fn copied_predictor_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = RndModel::new(RndConfig::control(2, 1), &mut rng);
        m.copy_target_into_predictor();
        assert!(m.rnd_rewards(&batch(4, 1)).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn depends_on_next_state_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = RndModel::new(RndConfig::control(2, 1), &mut rng);
        let mut b = batch(2, 2);
        let row = b.next_states.row(0).to_vec();
        b.next_states.row_mut(1).copy_from_slice(&row);
        let r = m.rnd_rewards(&b).unwrap();
        assert_eq!(r[0], r[1]);
        assert!(r[0] > 0.0);
    }

    #[test]
    fn target_is_frozen_and_loss_is_mean_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = RndModel::new(RndConfig::control(2, 1), &mut rng);
        let b = batch(16, 3);
        let before: Vec<Matrix> = m.target_net().params().iter().map(|p| p.value.clone()).collect();
        let mean_reward = m.rnd_rewards(&b).unwrap().iter().sum::<f64>() / 16.0;
        let loss = m.rnd_train_step(&b).unwrap();
        assert!((loss - mean_reward).abs() < 1e-12);
        let after: Vec<Matrix> = m.target_net().params().iter().map(|p| p.value.clone()).collect();
        for (a, b) in before.iter().zip(&after) {
            let bits_a: Vec<u64> = a.as_slice().iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.as_slice().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }
}
