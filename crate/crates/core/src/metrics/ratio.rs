use rand::Rng;

use crate::envs::{sample_from_source, transitions_to_batch, ImageDataset};
use crate::error::Result;
use crate::transition::CuriosityModel;

/// Mean reward and the two source-conditioned means behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRatio {
    /// `stochastic / deterministic`; `+inf` when the denominator is zero.
    pub ratio: f64,
    pub stochastic: f64,
    pub deterministic: f64,
}

/// Ratio of two means, mapping a zero denominator to `+inf`.
pub fn ratio_of_means(stochastic: &[f64], deterministic: &[f64]) -> RewardRatio {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (num, den) = (mean(stochastic), mean(deterministic));
    let ratio = if den == 0.0 {
        log::warn!("reward ratio denominator is zero (numerator {num}); reporting +inf");
        f64::INFINITY
    } else {
        num / den
    };
    RewardRatio {
        ratio,
        stochastic: num,
        deterministic: den,
    }
}

/// Mean intrinsic reward over `n_eval` transitions from 1-images divided by the
/// mean over `n_eval` transitions from 0-images.
pub fn reward_ratio<R: Rng + ?Sized>(
    model: &dyn CuriosityModel,
    ds: &ImageDataset,
    rng: &mut R,
    n_eval: usize,
) -> Result<RewardRatio> {
    let ones = transitions_to_batch(&sample_from_source(ds, 1, rng, n_eval)?)?;
    let zeros = transitions_to_batch(&sample_from_source(ds, 0, rng, n_eval)?)?;
    Ok(ratio_of_means(&model.rewards(&ones)?, &model.rewards(&zeros)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rewards_give_one() {
        assert_eq!(ratio_of_means(&[0.4; 7], &[0.4; 7]).ratio, 1.0);
    }

    #[test]
    fn zero_denominator_is_infinite() {
        assert_eq!(ratio_of_means(&[1.0], &[0.0]).ratio, f64::INFINITY);
    }
}
