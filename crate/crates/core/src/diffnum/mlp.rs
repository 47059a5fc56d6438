use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Grads, Matrix, ParamTensor, Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    /// Negative slope 0.01.
    LeakyRelu,
}

/// Weight initialization scheme; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Orthogonal hidden layers scaled by `hidden_gain`, output layer by `output_gain`.
    Orthogonal { hidden_gain: f64, output_gain: f64 },
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    FanInUniform,
    Zeros,
}

#[derive(Debug, Clone)]
pub struct Linear {
    /// `in x out`
    pub weight: ParamTensor,
    /// `1 x out`
    pub bias: ParamTensor,
}

impl Linear {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        let h = tape.matmul(x, w)?;
        tape.add_row(h, b)
    }
}

/// Fully connected network; the activation sits between layers, the output is linear.
#[derive(Debug, Clone)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, init: Init, rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (widths[l], widths[l + 1]);
                let weight = match init {
                    Init::Zeros => Matrix::zeros(fan_in, fan_out),
                    Init::FanInUniform => {
                        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                        let u = Uniform::new_inclusive(-bound, bound).expect("valid bound");
                        Matrix::from_vec(
                            fan_in,
                            fan_out,
                            (0..fan_in * fan_out).map(|_| u.sample(rng)).collect(),
                        )
                    }
                    Init::Orthogonal {
                        hidden_gain,
                        output_gain,
                    } => {
                        let gain = if l + 1 == n { output_gain } else { hidden_gain };
                        orthogonal(fan_in, fan_out, gain, rng)
                    }
                };
                Linear {
                    weight: ParamTensor::new(weight),
                    bias: ParamTensor::zeros(1, fan_out),
                }
            })
            .collect();
        Self {
            widths: widths.to_vec(),
            activation,
            layers,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Records the forward pass of a `rows x input_dim` batch.
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (_, c) = tape.shape(x);
        if c != self.input_dim() {
            return Err(Error::shape("mlp_forward", self.input_dim(), c));
        }
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = match self.activation {
                    Activation::Relu => tape.relu(h),
                    Activation::LeakyRelu => tape.leaky_relu(h, 0.01),
                };
            }
        }
        Ok(h)
    }

    /// Single-vector evaluation on a throwaway tape.
    pub fn forward_vec(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::row_vector(input.to_vec()));
        let y = self.forward(&mut tape, x)?;
        Ok(tape.value(y).as_slice().to_vec())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn accumulate_grads(&mut self, grads: &Grads) {
        for p in self.params_mut() {
            grads.accumulate_into(p);
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// `rows x cols` matrix with orthonormal columns (or rows, if wider than tall).
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Matrix {
    let (n, k) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // k vectors of length n, Gram-Schmidt'd.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut m = Matrix::zeros(rows, cols);
    for (j, b) in basis.iter().enumerate() {
        for (i, &x) in b.iter().enumerate() {
            if rows >= cols {
                m.set(i, j, gain * x);
            } else {
                m.set(j, i, gain * x);
            }
        }
    }
    m
}
