//! Latent Bayesian Surprise exploration toolkit: a latent dynamics model whose
//! posterior/prior KL serves as an intrinsic reward, competing curiosity
//! bonuses, a PPO learner, benchmark environments and an experiment harness.

pub mod baselines;
pub mod diffnum;
pub mod envs;
pub mod harness;
pub mod error;
pub mod latent;
pub mod metrics;
pub mod policy;
pub mod transition;

pub use error::{Error, Result};
pub use latent::{LbsConfig, LbsModel};
pub use transition::{CuriosityModel, Transition, TransitionBatch};
pub use harness::{run_experiment, ExperimentConfig, Method, RunRecord};
