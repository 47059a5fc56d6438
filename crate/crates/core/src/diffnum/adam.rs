use serde::{Deserialize, Serialize};

use super::{Matrix, ParamTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: None,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Adam optimizer. Moment buffers are matched to parameters by position, so
/// `step` must always receive the same parameter list in the same order.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.cfg
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update from `p.grad` and clears the gradients.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} tensors, step received {}",
                self.m.len(),
                params.len()
            )));
        }
        let mut sq_norm = 0.0;
        for (i, p) in params.iter().enumerate() {
            if let Some(bad) = p.grad.as_slice().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of tensor {i} (shape {:?}) has {} at element {bad}",
                    p.shape(),
                    p.grad.as_slice()[bad]
                )));
            }
            sq_norm += p.grad.as_slice().iter().map(|g| g * g).sum::<f64>();
        }
        let clip = match self.cfg.max_grad_norm {
            Some(max) if sq_norm.sqrt() > max => max / (sq_norm.sqrt() + 1e-12),
            _ => 1.0,
        };

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            ..
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.as_slice();
            let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
            let w = p.value.as_mut_slice();
            for j in 0..w.len() {
                let gj = g[j] * clip;
                ms[j] = beta1 * ms[j] + (1.0 - beta1) * gj;
                vs[j] = beta2 * vs[j] + (1.0 - beta2) * gj * gj;
                let mhat = ms[j] / bc1;
                let vhat = vs[j] / bc2;
                w[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
            if !p.value.all_finite() {
                return Err(Error::NonFinite(format!("parameter of shape {:?} after update", p.shape())));
            }
            p.zero_grad();
        }
        Ok(())
    }
}
