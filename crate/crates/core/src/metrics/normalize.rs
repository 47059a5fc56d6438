use serde::{Deserialize, Serialize};

use super::RunningMoments;
use crate::error::Result;

pub const STATE_CLIP: f64 = 10.0;
pub const REWARD_CLIP: f64 = 3.0;
const STD_EPS: f64 = 1e-8;

/// `(s - mean) / max(std, 1e-8)` clamped to `[-10, 10]`. With fewer than two
/// samples the std is treated as 1.
pub fn normalize_state(m: &RunningMoments, s: &[f64]) -> Result<Vec<f64>> {
    if s.len() != m.dim() {
        return Err(crate::Error::shape("normalize_state", m.dim(), s.len()));
    }
    let std = if m.count() >= 2 { m.std() } else { vec![1.0; m.dim()] };
    Ok(s.iter()
        .zip(m.mean())
        .zip(std)
        .map(|((x, mu), sd)| ((x - mu) / sd.max(STD_EPS)).clamp(-STATE_CLIP, STATE_CLIP))
        .collect())
}

/// Divides rewards by a running std of the discounted return, then clips to `[-3, 3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnNormalizer {
    gamma: f64,
    acc: f64,
    moments: RunningMoments,
}

impl ReturnNormalizer {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            acc: 0.0,
            moments: RunningMoments::new(1),
        }
    }

    pub fn return_std(&self) -> Option<f64> {
        (self.moments.count() >= 2).then(|| self.moments.std()[0])
    }

    pub fn normalize(&mut self, r: f64, done: bool) -> f64 {
        self.acc = self.gamma * self.acc + r;
        self.moments.update(&[self.acc]).expect("1-d accumulator");
        if done {
            self.acc = 0.0;
        }
        let scale = self.return_std().unwrap_or(1.0).max(STD_EPS);
        (r / scale).clamp(-REWARD_CLIP, REWARD_CLIP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_at_mean_is_zero() {
        let mut m = RunningMoments::new(2);
        for x in [[1.0, 5.0], [3.0, 7.0], [2.0, 6.0]] {
            m.update(&x).unwrap();
        }
        assert_eq!(normalize_state(&m, &[2.0, 6.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_stream_gives_zero() {
        let mut m = RunningMoments::new(1);
        for _ in 0..10 {
            m.update(&[4.2]).unwrap();
        }
        assert_eq!(normalize_state(&m, &[4.2]).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let mut rn = ReturnNormalizer::new(0.99);
        for i in 0..100 {
            assert_eq!(rn.normalize(0.0, i % 7 == 0), 0.0);
        }
    }
}
