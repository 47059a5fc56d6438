//! Competing intrinsic-reward generators built on the same numerics.

mod disagreement;
mod icm;
mod rnd;

pub use disagreement::{EnsembleConfig, EnsembleModel};
pub use icm::{feature_mse, IcmConfig, IcmLosses, IcmModel};
pub use rnd::{RndConfig, RndModel};

use rand::RngCore;

use crate::diffnum::ParamTensor;
use crate::error::Result;
use crate::transition::{CuriosityModel, TransitionBatch};

/// The random-action baseline carries no reward signal; its behaviour lives in
/// the uniform policy the harness uses for it.
pub fn random_bonus() -> f64 {
    0.0
}

#[derive(Debug, Clone, Default)]
pub struct RandomBonus;

impl CuriosityModel for RandomBonus {
    fn name(&self) -> &'static str {
        "random"
    }

    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        Ok(vec![random_bonus(); batch.len()])
    }

    fn train_step(&mut self, _batch: &TransitionBatch, _rng: &mut dyn RngCore) -> Result<f64> {
        Ok(0.0)
    }

    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        Vec::new()
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        Vec::new()
    }
}
