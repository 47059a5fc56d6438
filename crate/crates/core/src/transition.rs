use rand::RngCore;

use crate::diffnum::{Matrix, ParamTensor};
use crate::error::{Error, Result};

/// One environment step as seen by the curiosity models.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub external_reward: f64,
    pub intrinsic_reward: f64,
    pub done: bool,
}

impl Transition {
    pub fn new(state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>) -> Self {
        Self {
            state,
            action,
            next_state,
            external_reward: 0.0,
            intrinsic_reward: 0.0,
            done: false,
        }
    }
}

/// Row-aligned `(s_t, a_t, s_{t+1})` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBatch {
    pub states: Matrix,
    pub actions: Matrix,
    pub next_states: Matrix,
}

impl TransitionBatch {
    pub fn new(states: Matrix, actions: Matrix, next_states: Matrix) -> Result<Self> {
        let n = states.rows();
        if actions.rows() != n || next_states.rows() != n {
            return Err(Error::shape(
                "TransitionBatch",
                format!("{n} rows everywhere"),
                format!("{} / {} / {}", n, actions.rows(), next_states.rows()),
            ));
        }
        if states.cols() != next_states.cols() {
            return Err(Error::shape("TransitionBatch", states.cols(), next_states.cols()));
        }
        Ok(Self {
            states,
            actions,
            next_states,
        })
    }

    pub fn from_transitions(ts: &[Transition]) -> Result<Self> {
        let s: Vec<&[f64]> = ts.iter().map(|t| t.state.as_slice()).collect();
        let a: Vec<&[f64]> = ts.iter().map(|t| t.action.as_slice()).collect();
        let n: Vec<&[f64]> = ts.iter().map(|t| t.next_state.as_slice()).collect();
        let mut actions = Matrix::from_rows(&a);
        if actions.rows() != ts.len() {
            // zero-width actions
            actions = Matrix::zeros(ts.len(), 0);
        }
        Self::new(Matrix::from_rows(&s), actions, Matrix::from_rows(&n))
    }

    pub fn single(t: &Transition) -> Result<Self> {
        Self::new(
            Matrix::row_vector(t.state.clone()),
            Matrix::row_vector(t.action.clone()),
            Matrix::row_vector(t.next_state.clone()),
        )
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.cols()
    }

    pub fn action_dim(&self) -> usize {
        self.actions.cols()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            states: self.states.select_rows(idx),
            actions: self.actions.select_rows(idx),
            next_states: self.next_states.select_rows(idx),
        }
    }
}

/// An intrinsic-reward generator trained alongside the policy.
pub trait CuriosityModel: Send {
    fn name(&self) -> &'static str;

    /// One nonnegative reward per row, computed from current parameters.
    fn rewards(&self, batch: &TransitionBatch) -> Result<Vec<f64>>;

    /// One optimizer step on `batch`; returns the loss before the step.
    fn train_step(&mut self, batch: &TransitionBatch, rng: &mut dyn RngCore) -> Result<f64>;

    fn named_params(&self) -> Vec<(String, &ParamTensor)>;

    fn named_params_mut(&mut self) -> Vec<(String, &mut ParamTensor)>;

    fn reward(&self, t: &Transition) -> Result<f64> {
        Ok(self.rewards(&TransitionBatch::single(t)?)?[0])
    }
}

pub(crate) fn check_batch(ctx: &'static str, batch: &TransitionBatch, state_dim: usize, action_dim: usize) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Contract(format!("{ctx}: empty batch")));
    }
    if batch.state_dim() != state_dim {
        return Err(Error::shape(ctx, format!("state dim {state_dim}"), batch.state_dim()));
    }
    if batch.action_dim() != action_dim {
        return Err(Error::shape(ctx, format!("action dim {action_dim}"), batch.action_dim()));
    }
    Ok(())
}

pub(crate) fn check_finite(ctx: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{ctx} evaluated to {v}")))
    }
}

pub(crate) fn named<'a>(prefix: &str, params: Vec<&'a ParamTensor>) -> Vec<(String, &'a ParamTensor)> {
    params
        .into_iter()
        .enumerate()
        .map(|(i, p)| (format!("{prefix}.{i}"), p))
        .collect()
}

pub(crate) fn named_mut<'a>(prefix: &str, params: Vec<&'a mut ParamTensor>) -> Vec<(String, &'a mut ParamTensor)> {
    params
        .into_iter()
        .enumerate()
        .map(|(i, p)| (format!("{prefix}.{i}"), p))
        .collect()
}
