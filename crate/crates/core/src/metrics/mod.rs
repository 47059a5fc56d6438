//! Coverage, normalization and reward-ratio metrics.

mod coverage;
mod moments;
mod normalize;
mod ratio;

pub use coverage::{CoverageGrid, BINS_PER_DIM};
pub use moments::RunningMoments;
pub use normalize::{normalize_state, ReturnNormalizer, REWARD_CLIP, STATE_CLIP};
pub use ratio::{ratio_of_means, reward_ratio, RewardRatio};
