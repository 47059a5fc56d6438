use std::sync::atomic::{AtomicU64, Ordering};

use super::Matrix;

static NEXT_PARAM_ID: AtomicU64 = AtomicU64::new(0);

/// Identity of a trainable tensor on a [`Tape`](super::Tape).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(u64);

impl ParamId {
    fn fresh() -> Self {
        ParamId(NEXT_PARAM_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Trainable tensor with its accumulated gradient. Shape is `rows x cols`;
/// biases and vectors are single rows.
///
/// Cloning gives the copy a new [`ParamId`] so both can sit on one tape
/// without their gradients being merged.
#[derive(Debug)]
pub struct ParamTensor {
    id: ParamId,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Clone for ParamTensor {
    fn clone(&self) -> Self {
        Self {
            id: ParamId::fresh(),
            value: self.value.clone(),
            grad: self.grad.clone(),
        }
    }
}

impl ParamTensor {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            id: ParamId::fresh(),
            value,
            grad: Matrix::zeros(r, c),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn id(&self) -> ParamId {
        self.id
    }

    pub fn shape(&self) -> [usize; 2] {
        let (r, c) = self.value.shape();
        [r, c]
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.as_mut_slice().fill(0.0);
    }
}
