use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mountain_car::{mc_reset, mc_step, smc_step, NoiseVariant, StochMountainCarState};
use super::EnvId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Episode ended, by reaching the goal or by timeout.
    pub done: bool,
    /// Episode ended at the goal.
    pub terminal: bool,
}

/// Episodic Mountain Car (plain or noisy) with its own seeded generator.
#[derive(Debug, Clone)]
pub struct ControlEnv {
    id: EnvId,
    variant: Option<NoiseVariant>,
    state: StochMountainCarState,
    t: usize,
    episode_len: usize,
    rng: ChaCha8Rng,
}

impl ControlEnv {
    pub fn new(id: EnvId, episode_len: usize, seed: u64) -> Result<Self> {
        let variant = match id {
            EnvId::MountainCar => None,
            EnvId::SmcFrozen => Some(NoiseVariant::Frozen),
            EnvId::SmcEvolving => Some(NoiseVariant::Evolving),
            EnvId::StochasticImage => {
                return Err(Error::Config("stochastic-image is not a control environment".into()))
            }
        };
        if episode_len == 0 {
            return Err(Error::Config("episode length must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = StochMountainCarState {
            original: mc_reset(&mut rng),
            noisy: 0.0,
        };
        Ok(Self {
            id,
            variant,
            state,
            t: 0,
            episode_len,
            rng,
        })
    }

    pub fn id(&self) -> EnvId {
        self.id
    }

    pub fn obs_dim(&self) -> usize {
        if self.variant.is_some() {
            3
        } else {
            2
        }
    }

    pub fn action_dim(&self) -> usize {
        if self.variant.is_some() {
            2
        } else {
            1
        }
    }

    pub fn state(&self) -> StochMountainCarState {
        self.state
    }

    pub fn observation(&self) -> Vec<f64> {
        let mut v = self.state.as_vec();
        v.truncate(self.obs_dim());
        v
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.state = StochMountainCarState {
            original: mc_reset(&mut self.rng),
            noisy: 0.0,
        };
        self.t = 0;
        self.observation()
    }

    /// Steps the car. On episode end, `obs` is the final observation and the
    /// environment has already been reset for the next call.
    pub fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if action.len() != self.action_dim() {
            return Err(Error::shape("env step action", self.action_dim(), action.len()));
        }
        let (reward, terminal) = match self.variant {
            None => {
                let st = mc_step(self.state.original, action[0]);
                self.state.original = st.state;
                (st.reward, st.done)
            }
            Some(v) => {
                let st = smc_step(self.state, action[0], action[1], v, &mut self.rng);
                self.state = st.state;
                (st.reward, st.done)
            }
        };
        self.t += 1;
        let obs = self.observation();
        let done = terminal || self.t >= self.episode_len;
        if done {
            self.reset();
        }
        Ok(EnvStep {
            obs,
            reward,
            done,
            terminal,
        })
    }

    /// `(position, velocity)`; the noisy coordinate never counts toward coverage.
    pub fn coverage_point(obs: &[f64]) -> [f64; 2] {
        [obs[0], obs[1]]
    }
}
