use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Welford accumulator of per-dimension mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape("moments_update", self.dim(), x.len()));
        }
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
        Ok(())
    }

    /// Population variance; zero before two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.dim()];
        }
        self.m2.iter().map(|s| (s / self.count as f64).max(0.0)).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.variance().into_iter().map(f64::sqrt).collect()
    }

    /// Parallel combination (Chan et al.) of two accumulators.
    pub fn merge(&self, other: &RunningMoments) -> Result<RunningMoments> {
        if self.dim() != other.dim() {
            return Err(Error::shape("moments_merge", self.dim(), other.dim()));
        }
        if other.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(other.clone());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let mut out = RunningMoments::new(self.dim());
        out.count = self.count + other.count;
        for d in 0..self.dim() {
            let delta = other.mean[d] - self.mean[d];
            out.mean[d] = self.mean[d] + delta * nb / n;
            out.m2[d] = self.m2[d] + other.m2[d] + delta * delta * na * nb / n;
        }
        Ok(out)
    }
}
