//! Continuous Mountain Car and its two remote-controlled noisy variants.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
pub const POWER: f64 = 0.0015;
pub const GRAVITY: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainCarState {
    pub position: f64,
    pub velocity: f64,
}

impl MountainCarState {
    pub fn new(position: f64, velocity: f64) -> Self {
        Self {
            position: position.clamp(MIN_POSITION, MAX_POSITION),
            velocity: velocity.clamp(-MAX_SPEED, MAX_SPEED),
        }
    }

    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.position, self.velocity]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStep {
    pub state: MountainCarState,
    pub reward: f64,
    pub done: bool,
}

/// Classic continuous dynamics. Hitting the left wall while moving left stops the car.
pub fn mc_step(s: MountainCarState, force: f64) -> McStep {
    let force = if force.is_nan() { 0.0 } else { force.clamp(-1.0, 1.0) };
    let mut velocity = (s.velocity + force * POWER - GRAVITY * (3.0 * s.position).cos()).clamp(-MAX_SPEED, MAX_SPEED);
    let position = (s.position + velocity).clamp(MIN_POSITION, MAX_POSITION);
    if position == MIN_POSITION && velocity < 0.0 {
        velocity = 0.0;
    }
    let done = position >= GOAL_POSITION;
    let reward = if done { 100.0 } else { 0.0 } - 0.1 * force * force;
    McStep {
        state: MountainCarState { position, velocity },
        reward,
        done,
    }
}

/// Position uniform in `[-0.6, -0.4]`, zero velocity.
pub fn mc_reset<R: Rng + ?Sized>(rng: &mut R) -> MountainCarState {
    MountainCarState {
        position: rng.random_range(-0.6..=-0.4),
        velocity: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseVariant {
    /// Car state is held fixed while the remote is pressed.
    Frozen,
    /// Car keeps moving under zero force while the remote is pressed.
    Evolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochMountainCarState {
    pub original: MountainCarState,
    /// Always within `[-1, 1]`.
    pub noisy: f64,
}

impl StochMountainCarState {
    pub fn as_vec(&self) -> Vec<f64> {
        vec![self.original.position, self.original.velocity, self.noisy]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmcStep {
    pub state: StochMountainCarState,
    pub reward: f64,
    pub done: bool,
}

/// Remote > 0 resamples the noisy coordinate from `U[-1, 1]` and applies `variant`
/// to the car; otherwise the car follows [`mc_step`] and the noise is untouched.
pub fn smc_step<R: Rng + ?Sized>(
    s: StochMountainCarState,
    force: f64,
    remote: f64,
    variant: NoiseVariant,
    rng: &mut R,
) -> SmcStep {
    let remote = if remote.is_nan() { 0.0 } else { remote.clamp(-1.0, 1.0) };
    if remote > 0.0 {
        let noisy = rng.random_range(-1.0..=1.0);
        let (original, reward, done) = match variant {
            NoiseVariant::Frozen => (s.original, 0.0, false),
            NoiseVariant::Evolving => {
                let st = mc_step(s.original, 0.0);
                (st.state, st.reward, st.done)
            }
        };
        SmcStep {
            state: StochMountainCarState { original, noisy },
            reward,
            done,
        }
    } else {
        let st = mc_step(s.original, force);
        SmcStep {
            state: StochMountainCarState {
                original: st.state,
                noisy: s.noisy,
            },
            reward: st.reward,
            done: st.done,
        }
    }
}
