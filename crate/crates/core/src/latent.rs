//! Latent dynamics model and its Bayesian-surprise reward.
//!
//! Three networks share one optimizer:
//!
//! * latent prior `p(z' | s, a)`,
//! * latent posterior `q(z' | s, a, s')`,
//! * reconstruction `p(s' | z')`, a single linear layer.
//!
//! Training minimizes the negative variational bound
//! `-(E_q[ln p(s'|z')] - beta * KL(q || p))` with one reparametrized posterior
//! sample per transition. The intrinsic reward is the closed-form
//! `KL(q || p)` of the two latent heads, evaluated without sampling.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::diffnum::{
    standard_normal, Activation, Adam, AdamConfig, DiagonalGaussian, GaussianVar, Init, Matrix, Mlp, ParamTensor,
    Tape, Var,
};
use crate::error::{Error, Result};
use crate::transition::{check_batch, check_finite, named, named_mut, CuriosityModel, Transition, TransitionBatch};

/// How the reconstruction head models `s'` around its predicted mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconStd {
    /// Per-dimension std output by the head (softplus, floored).
    Learned,
    /// Fixed unit std, so the head is a point estimate scored by squared error.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbsConfig {
    pub state_dim: usize,
    pub action_dim: usize,
    pub latent_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub beta: f64,
    pub recon_std: ReconStd,
    pub adam: AdamConfig,
}

impl LbsConfig {
    /// Continuous-control defaults: latent size equals state size, 32-unit ReLU layers, beta 0.1.
    pub fn control(state_dim: usize, action_dim: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            latent_dim: state_dim,
            hidden: 32,
            activation: Activation::Relu,
            beta: 0.1,
            recon_std: ReconStd::Learned,
            adam: AdamConfig::default(),
        }
    }
}

/// Per-batch pieces of the variational bound, averaged over rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub loss: f64,
    pub reconstruction_log_likelihood: f64,
    pub kl: f64,
}

#[derive(Debug, Clone)]
pub struct LbsModel {
    cfg: LbsConfig,
    prior: Mlp,
    posterior: Mlp,
    reconstruction: Mlp,
    opt: Adam,
}

struct Recorded {
    loss: Var,
    recon: Var,
    kl: Var,
}

impl LbsModel {
    pub fn new<R: rand::Rng + ?Sized>(cfg: LbsConfig, rng: &mut R) -> Result<Self> {
        Self::with_init(cfg, Init::FanInUniform, rng)
    }

    pub fn with_init<R: rand::Rng + ?Sized>(cfg: LbsConfig, init: Init, rng: &mut R) -> Result<Self> {
        if cfg.beta.is_nan() || cfg.beta < 0.0 {
            return Err(Error::Config(format!("beta must be nonnegative, got {}", cfg.beta)));
        }
        if cfg.latent_dim == 0 || cfg.state_dim == 0 {
            return Err(Error::Config("state and latent dims must be positive".into()));
        }
        let (s, a, l, h) = (cfg.state_dim, cfg.action_dim, cfg.latent_dim, cfg.hidden);
        let prior = Mlp::new(&[s + a, h, h, 2 * l], cfg.activation, init, rng);
        let posterior = Mlp::new(&[s + a + s, h, h, 2 * l], cfg.activation, init, rng);
        let recon_out = match cfg.recon_std {
            ReconStd::Learned => 2 * s,
            ReconStd::Unit => s,
        };
        let reconstruction = Mlp::new(&[l, recon_out], cfg.activation, init, rng);
        let opt = Adam::new(cfg.adam);
        Ok(Self {
            cfg,
            prior,
            posterior,
            reconstruction,
            opt,
        })
    }

    pub fn config(&self) -> &LbsConfig {
        &self.cfg
    }

    pub fn beta(&self) -> f64 {
        self.cfg.beta
    }

    pub fn prior_net(&self) -> &Mlp {
        &self.prior
    }

    pub fn prior_net_mut(&mut self) -> &mut Mlp {
        &mut self.prior
    }

    pub fn posterior_net(&self) -> &Mlp {
        &self.posterior
    }

    pub fn posterior_net_mut(&mut self) -> &mut Mlp {
        &mut self.posterior
    }

    pub fn reconstruction_net(&self) -> &Mlp {
        &self.reconstruction
    }

    pub fn reconstruction_net_mut(&mut self) -> &mut Mlp {
        &mut self.reconstruction
    }

    /// Latent prior for a batch of `(s, a)` rows.
    pub fn prior_dist(&self, tape: &mut Tape, s: Var, a: Var) -> Result<GaussianVar> {
        let x = tape.concat(&[s, a])?;
        let raw = self.prior.forward(tape, x)?;
        GaussianVar::from_head(tape, raw)
    }

    /// Latent posterior for a batch of `(s, a, s')` rows.
    pub fn posterior_dist(&self, tape: &mut Tape, s: Var, a: Var, s_next: Var) -> Result<GaussianVar> {
        let x = tape.concat(&[s, a, s_next])?;
        let raw = self.posterior.forward(tape, x)?;
        GaussianVar::from_head(tape, raw)
    }

    fn reconstruction_log_density(&self, tape: &mut Tape, z: Var, s_next: Var) -> Result<Var> {
        let raw = self.reconstruction.forward(tape, z)?;
        match self.cfg.recon_std {
            ReconStd::Learned => GaussianVar::from_head(tape, raw)?.log_density(tape, s_next),
            ReconStd::Unit => {
                let (r, c) = tape.shape(raw);
                let std = tape.constant(Matrix::filled(r, c, 1.0));
                GaussianVar { mean: raw, std }.log_density(tape, s_next)
            }
        }
    }

    pub fn prior_forward(&self, s: &[f64], a: &[f64]) -> Result<DiagonalGaussian> {
        self.check_dims(s.len(), a.len(), None)?;
        let mut tape = Tape::new();
        let sv = tape.constant(Matrix::row_vector(s.to_vec()));
        let av = tape.constant(Matrix::row_vector(a.to_vec()));
        Ok(self.prior_dist(&mut tape, sv, av)?.row(&tape, 0))
    }

    pub fn posterior_forward(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> Result<DiagonalGaussian> {
        self.check_dims(s.len(), a.len(), Some(s_next.len()))?;
        let mut tape = Tape::new();
        let sv = tape.constant(Matrix::row_vector(s.to_vec()));
        let av = tape.constant(Matrix::row_vector(a.to_vec()));
        let nv = tape.constant(Matrix::row_vector(s_next.to_vec()));
        Ok(self.posterior_dist(&mut tape, sv, av, nv)?.row(&tape, 0))
    }

    fn check_dims(&self, s: usize, a: usize, s_next: Option<usize>) -> Result<()> {
        if s != self.cfg.state_dim {
            return Err(Error::shape("latent model state", self.cfg.state_dim, s));
        }
        if a != self.cfg.action_dim {
            return Err(Error::shape("latent model action", self.cfg.action_dim, a));
        }
        if let Some(n) = s_next {
            if n != self.cfg.state_dim {
                return Err(Error::shape("latent model next state", self.cfg.state_dim, n));
            }
        }
        Ok(())
    }

    fn record_elbo(&self, tape: &mut Tape, batch: &TransitionBatch, noise: &Matrix) -> Result<Recorded> {
        check_batch("elbo_loss", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let s = tape.constant(batch.states.clone());
        let a = tape.constant(batch.actions.clone());
        let n = tape.constant(batch.next_states.clone());
        let prior = self.prior_dist(tape, s, a)?;
        let post = self.posterior_dist(tape, s, a, n)?;
        let z = post.sample(tape, noise)?;
        let ll = self.reconstruction_log_density(tape, z, n)?;
        let kl = post.kl(tape, &prior)?;
        let recon = tape.mean(ll);
        let kl_mean = tape.mean(kl);
        let weighted = tape.scale(kl_mean, self.cfg.beta);
        let elbo = tape.sub(recon, weighted)?;
        let loss = tape.neg(elbo);
        Ok(Recorded {
            loss,
            recon,
            kl: kl_mean,
        })
    }

    /// Negative bound on `batch` with the given `rows x latent_dim` standard-normal noise.
    pub fn elbo_loss(&self, batch: &TransitionBatch, noise: &Matrix) -> Result<ElboTerms> {
        let mut tape = Tape::new();
        let r = self.record_elbo(&mut tape, batch, noise)?;
        let terms = ElboTerms {
            loss: tape.value(r.loss).item(),
            reconstruction_log_likelihood: tape.value(r.recon).item(),
            kl: tape.value(r.kl).item(),
        };
        check_finite("elbo loss", terms.loss)?;
        Ok(terms)
    }

    /// `KL(q(z'|s,a,s') || p(z'|s,a))` per row.
    pub fn intrinsic_rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        check_batch("intrinsic_reward", batch, self.cfg.state_dim, self.cfg.action_dim)?;
        let mut tape = Tape::new();
        let s = tape.constant(batch.states.clone());
        let a = tape.constant(batch.actions.clone());
        let n = tape.constant(batch.next_states.clone());
        let prior = self.prior_dist(&mut tape, s, a)?;
        let post = self.posterior_dist(&mut tape, s, a, n)?;
        let kl = post.kl(&mut tape, &prior)?;
        Ok(tape.value(kl).as_slice().iter().map(|k| k.max(0.0)).collect())
    }

    pub fn intrinsic_reward(&self, t: &Transition) -> Result<f64> {
        self.check_dims(t.state.len(), t.action.len(), Some(t.next_state.len()))?;
        Ok(self.intrinsic_rewards(&TransitionBatch::single(t)?)?[0])
    }

    /// One Adam step on the bound using explicit noise; returns the pre-step terms.
    pub fn train_step_with_noise(&mut self, batch: &TransitionBatch, noise: &Matrix) -> Result<ElboTerms> {
        let mut tape = Tape::new();
        let r = self.record_elbo(&mut tape, batch, noise)?;
        let terms = ElboTerms {
            loss: tape.value(r.loss).item(),
            reconstruction_log_likelihood: tape.value(r.recon).item(),
            kl: tape.value(r.kl).item(),
        };
        check_finite("elbo loss", terms.loss)?;
        let grads = tape.backward(r.loss)?;
        let mut params = self.prior.params_mut();
        params.extend(self.posterior.params_mut());
        params.extend(self.reconstruction.params_mut());
        for p in params.iter_mut() {
            grads.accumulate_into(p);
        }
        self.opt.step(&mut params)?;
        Ok(terms)
    }

    pub fn train(&mut self, batch: &TransitionBatch, rng: &mut dyn RngCore) -> Result<ElboTerms> {
        let noise = standard_normal(batch.len(), self.cfg.latent_dim, rng);
        self.train_step_with_noise(batch, &noise)
    }
}

impl CuriosityModel for LbsModel {
    fn name(&self) -> &'static str {
        "lbs"
    }

    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        self.intrinsic_rewards(batch)
    }

    fn train_step(&mut self, batch: &TransitionBatch, rng: &mut dyn RngCore) -> Result<f64> {
        Ok(self.train(batch, rng)?.loss)
    }

    fn named_params(&self) -> Vec<(String, &ParamTensor)> {
        let mut v = named("prior", self.prior.params());
        v.extend(named("posterior", self.posterior.params()));
        v.extend(named("reconstruction", self.reconstruction.params()));
        v
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)> {
        let mut v = named_mut("prior", self.prior.params_mut());
        v.extend(named_mut("posterior", self.posterior.params_mut()));
        v.extend(named_mut("reconstruction", self.reconstruction.params_mut()));
        v
    }
}
