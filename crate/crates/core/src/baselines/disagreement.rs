use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::diffnum::{Activation, Adam, AdamConfig, Init, Matrix, Mlp, ParamTensor, Tape};
use crate::error::Result;
use crate::transition::{check_batch, check_finite, named, named_mut, CuriosityModel, TransitionBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub members: usize,
    pub hidden: usize,
    pub adam: AdamConfig,
}

impl EnsembleConfig {
    pub fn control(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            members: 5,
            hidden: 32,
            adam: AdamConfig::default(),
        }
    }
}

/// `k` independently initialized forward models `(s, a) -> s'`.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    cfg: EnsembleConfig,
    members: Vec<Mlp>,
    opts: Vec<Adam>,
}

impl EnsembleModel {
    pub fn new<R: rand::Rng + ?Sized>(cfg: EnsembleConfig, rng: &mut R) -> Self {
        let (s, a, h) = (cfg.state_dim, cfg.action_dim, cfg.hidden);
        let members = (0..cfg.members)
            .map(|_| Mlp::new(&[s + a, h, h, s], Activation::Relu, Init::FanInUniform, rng))
            .collect();
        let opts = (0..cfg.members).map(|_| Adam::new(cfg.adam)).collect();
        Self { cfg, members, opts }
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [Mlp] {
        &mut self.members
    }

    /// Each member's `rows x state_dim` prediction.
    pub fn predictions(&self, batch: &TransitionBatch) -> Result<Vec<Matrix>> {
        check_batch("disagreement", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let input = Matrix::hcat(&[&batch.states, &batch.actions]);
        self.members
            .iter()
            .map(|m| {
                let mut tape = Tape::new();
                let x = tape.constant(input.clone());
                let y = m.forward(&mut tape, x)?;
                Ok(tape.value(y).clone())
            })
            .collect()
    }

    /// Mean over state dims of the population variance across members.
    pub fn disagreement_rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        let preds = self.predictions(batch)?;
        Ok(population_variance_per_row(&preds))
    }

    /// Each member takes one Adam step on its own bootstrap resample of `batch`.
    pub fn disagreement_train_step(&mut self, batch: &TransitionBatch, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        check_batch("disagreement", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let n = batch.len();
        let mut losses = Vec::with_capacity(self.members.len());
        for (member, opt) in self.members.iter_mut().zip(&mut self.opts) {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let b = batch.select(&idx);
            let mut tape = Tape::new();
            let x = tape.constant(Matrix::hcat(&[&b.states, &b.actions]));
            let target = tape.constant(b.next_states);
            let pred = member.forward(&mut tape, x)?;
            let err = tape.sub(pred, target)?;
            let sq = tape.square(err);
            let loss = tape.mean(sq);
            losses.push(check_finite("ensemble member loss", tape.value(loss).item())?);
            let grads = tape.backward(loss)?;
            let mut params = member.params_mut();
            for p in params.iter_mut() {
                grads.accumulate_into(p);
            }
            opt.step(&mut params)?;
        }
        Ok(losses)
    }
}

pub(crate) fn population_variance_per_row(preds: &[Matrix]) -> Vec<f64> {
    let k = preds.len() as f64;
    let (rows, cols) = preds[0].shape();
    (0..rows)
        .map(|i| {
            let mut total = 0.0;
            for j in 0..cols {
                let mean = preds.iter().map(|p| p.get(i, j)).sum::<f64>() / k;
                total += preds.iter().map(|p| (p.get(i, j) - mean).powi(2)).sum::<f64>() / k;
            }
            total / cols.max(1) as f64
        })
        .collect()
}

impl CuriosityModel for EnsembleModel {
    fn name(&self) -> &'static str {
        "disagreement"
    }

    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        self.disagreement_rewards(batch)
    }

    fn train_step(&mut self, batch: &TransitionBatch, rng: &mut dyn RngCore) -> Result<f64> {
        let l = self.disagreement_train_step(batch, rng)?;
        Ok(l.iter().sum::<f64>() / l.len() as f64)
    }

    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        self.members
            .iter()
            .enumerate()
            .flat_map(|(i, m)| named(&format!("member{i}"), m.params()))
            .collect()
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        self.members
            .iter_mut()
            .enumerate()
            .flat_map(|(i, m)| named_mut(&format!("member{i}"), m.params_mut()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnum::standard_normal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rows: usize, seed: u64) -> TransitionBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TransitionBatch::new(
            standard_normal(rows, 1, &mut rng),
            standard_normal(rows, 1, &mut rng),
            standard_normal(rows, 1, &mut rng),
        )
        .unwrap()
    }

    #[test]
    fn variance_of_two_members() {
        let preds = vec![Matrix::scalar(0.0), Matrix::scalar(2.0)];
        assert_eq!(population_variance_per_row(&preds), vec![1.0]);
    }

    #[test]
    fn identical_members_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = EnsembleModel::new(EnsembleConfig::control(1, 1), &mut rng);
        let first = m.members()[0].clone();
        for member in m.members_mut().iter_mut().skip(1) {
            for (p, q) in member.params_mut().into_iter().zip(first.params()) {
                p.value = q.value.clone();
            }
        }
        assert!(m.disagreement_rewards(&batch(5, 1)).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn reward_ignores_next_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = EnsembleModel::new(EnsembleConfig::control(1, 1), &mut rng);
        let b = batch(5, 1);
        let mut c = b.clone();
        c.next_states = standard_normal(5, 1, &mut rng);
        assert_eq!(m.disagreement_rewards(&b).unwrap(), m.disagreement_rewards(&c).unwrap());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut m = EnsembleModel::new(EnsembleConfig::control(1, 1), &mut rng);
            let b = batch(32, 4);
            let mut out = Vec::new();
            for _ in 0..5 {
                out.extend(m.disagreement_train_step(&b, &mut rng).unwrap());
            }
            out
        };
        assert_eq!(run(), run());
    }
}
