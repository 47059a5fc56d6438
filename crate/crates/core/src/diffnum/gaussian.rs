//! Diagonal Gaussians, both as plain values and as batched tape nodes.

use std::f64::consts::{E, PI};

use super::tape::softplus;
use super::{Matrix, Tape, Var};
use crate::error::{Error, Result};

/// Lower bound added to every softplus standard deviation.
pub const STD_FLOOR: f64 = 1e-5;

/// `½ ln(2π)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::shape("DiagonalGaussian", mean.len(), std.len()));
        }
        if let Some(s) = std.iter().find(|s| **s <= 0.0 || !s.is_finite()) {
            return Err(Error::Contract(format!("standard deviation must be positive and finite, got {s}")));
        }
        Ok(Self { mean, std })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn entropy(&self) -> f64 {
        self.std
            .iter()
            .map(|s| 0.5 * (2.0 * PI * E * s * s).ln())
            .sum()
    }

    /// `H[self, other] = -E_self[ln other]`.
    pub fn cross_entropy(&self, other: &DiagonalGaussian) -> Result<f64> {
        check_dim("cross_entropy", self.dim(), other.dim())?;
        Ok(self
            .mean
            .iter()
            .zip(&self.std)
            .zip(other.mean.iter().zip(&other.std))
            .map(|((mq, sq), (mp, sp))| {
                HALF_LN_2PI + sp.ln() + (sq * sq + (mq - mp).powi(2)) / (2.0 * sp * sp)
            })
            .sum())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        gaussian_log_density(self, x)
    }
}

fn check_dim(ctx: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(ctx, a, b));
    }
    Ok(())
}

/// Mean passes through; std is `softplus(logit) + STD_FLOOR`.
pub fn gaussian_head(raw_mean: &[f64], raw_std_logits: &[f64]) -> Result<DiagonalGaussian> {
    check_dim("gaussian_head", raw_mean.len(), raw_std_logits.len())?;
    DiagonalGaussian::new(
        raw_mean.to_vec(),
        raw_std_logits.iter().map(|&l| softplus(l) + STD_FLOOR).collect(),
    )
}

/// Closed-form `KL(q || p)`.
pub fn kl_diag_gaussian(q: &DiagonalGaussian, p: &DiagonalGaussian) -> Result<f64> {
    check_dim("kl_diag_gaussian", q.dim(), p.dim())?;
    let kl: f64 = q
        .mean
        .iter()
        .zip(&q.std)
        .zip(p.mean.iter().zip(&p.std))
        .map(|((mq, sq), (mp, sp))| {
            (sp / sq).ln() + (sq * sq + (mq - mp).powi(2)) / (2.0 * sp * sp) - 0.5
        })
        .sum();
    // Rounding can leave a tiny negative residue for q == p.
    Ok(kl.max(0.0))
}

pub fn reparam_sample(d: &DiagonalGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    check_dim("reparam_sample", d.dim(), noise.len())?;
    Ok(d.mean
        .iter()
        .zip(&d.std)
        .zip(noise)
        .map(|((m, s), e)| m + s * e)
        .collect())
}

pub fn gaussian_log_density(d: &DiagonalGaussian, x: &[f64]) -> Result<f64> {
    check_dim("gaussian_log_density", d.dim(), x.len())?;
    Ok(d.mean
        .iter()
        .zip(&d.std)
        .zip(x)
        .map(|((m, s), x)| {
            let z = (x - m) / s;
            -HALF_LN_2PI - s.ln() - 0.5 * z * z
        })
        .sum())
}

/// Batch of diagonal Gaussians on a tape: one distribution per row.
#[derive(Debug, Clone, Copy)]
pub struct GaussianVar {
    pub mean: Var,
    pub std: Var,
}

impl GaussianVar {
    /// Splits a `rows x 2d` head output into mean and floored softplus std.
    pub fn from_head(tape: &mut Tape, raw: Var) -> Result<Self> {
        let (_, c) = tape.shape(raw);
        if c % 2 != 0 {
            return Err(Error::shape("GaussianVar::from_head", "even width", c));
        }
        let d = c / 2;
        let mean = tape.slice_cols(raw, 0, d)?;
        let logits = tape.slice_cols(raw, d, c)?;
        let sp = tape.softplus(logits);
        let std = tape.offset(sp, STD_FLOOR);
        Ok(Self { mean, std })
    }

    pub fn dim(&self, tape: &Tape) -> usize {
        tape.shape(self.mean).1
    }

    /// Row `i` as a plain value.
    pub fn row(&self, tape: &Tape, i: usize) -> DiagonalGaussian {
        DiagonalGaussian {
            mean: tape.value(self.mean).row(i).to_vec(),
            std: tape.value(self.std).row(i).to_vec(),
        }
    }

    /// Per-row `KL(self || p)`, shape `rows x 1`.
    pub fn kl(&self, tape: &mut Tape, p: &GaussianVar) -> Result<Var> {
        let log_sp = tape.ln(p.std);
        let log_sq = tape.ln(self.std);
        let log_ratio = tape.sub(log_sp, log_sq)?;
        let var_q = tape.square(self.std);
        let dm = tape.sub(self.mean, p.mean)?;
        let dm2 = tape.square(dm);
        let num = tape.add(var_q, dm2)?;
        let var_p = tape.square(p.std);
        let den = tape.scale(var_p, 2.0);
        let frac = tape.div(num, den)?;
        let terms = tape.add(log_ratio, frac)?;
        let terms = tape.offset(terms, -0.5);
        Ok(tape.row_sum(terms))
    }

    /// Per-row log density of `x`, shape `rows x 1`.
    pub fn log_density(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let diff = tape.sub(x, self.mean)?;
        let z = tape.div(diff, self.std)?;
        let z2 = tape.square(z);
        let half = tape.scale(z2, -0.5);
        let log_s = tape.ln(self.std);
        let terms = tape.sub(half, log_s)?;
        let terms = tape.offset(terms, -HALF_LN_2PI);
        Ok(tape.row_sum(terms))
    }

    /// `mean + std * noise`.
    pub fn sample(&self, tape: &mut Tape, noise: &Matrix) -> Result<Var> {
        if tape.shape(self.mean) != noise.shape() {
            return Err(Error::shape(
                "GaussianVar::sample",
                format!("{:?}", tape.shape(self.mean)),
                format!("{:?}", noise.shape()),
            ));
        }
        let e = tape.constant(noise.clone());
        let scaled = tape.mul(self.std, e)?;
        tape.add(self.mean, scaled)
    }

    /// Per-row entropy, shape `rows x 1`.
    pub fn entropy(&self, tape: &mut Tape) -> Var {
        let log_s = tape.ln(self.std);
        let terms = tape.offset(log_s, 0.5 * (2.0 * PI * E).ln());
        tape.row_sum(terms)
    }
}
