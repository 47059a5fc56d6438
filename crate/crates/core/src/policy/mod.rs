//! PPO actor-critic for continuous actions.

mod actor_critic;
mod buffer;
mod ppo;

pub use actor_critic::{gaussian_log_prob, uniform_action, ActOutput, ActorCritic, ActorCriticConfig};
pub use buffer::{combine_rewards, gae, normalize_advantages, RolloutBuffer, DEFAULT_HORIZON};
pub use ppo::{clipped_surrogate, minibatch_indices, ppo_update, PpoConfig, PpoStats};
