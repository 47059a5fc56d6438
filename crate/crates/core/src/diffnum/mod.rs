//! Reverse-mode differentiable numerics: matrices, a dynamic tape, dense
//! networks, diagonal Gaussians and the Adam optimizer.

mod adam;
mod gaussian;
mod matrix;
mod mlp;
mod param;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use gaussian::{
    gaussian_head, gaussian_log_density, kl_diag_gaussian, reparam_sample, DiagonalGaussian, GaussianVar,
    HALF_LN_2PI, STD_FLOOR,
};
pub use matrix::Matrix;
pub use mlp::{Activation, Init, Linear, Mlp};
pub use param::{ParamId, ParamTensor};
pub use tape::{sigmoid, softplus, Grads, Tape, Var};

use rand::Rng;
use rand_distr::StandardNormal;

/// `rows x cols` matrix of standard-normal draws.
pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}
