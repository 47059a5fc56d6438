//! Benchmark environments.

mod control;
pub mod glyphs;
pub mod idx;
mod image_task;
pub mod mountain_car;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use control::{ControlEnv, EnvStep};
pub use idx::{load_idx_images, load_idx_labels, parse_idx_images, parse_idx_labels, IdxImages};
pub use image_task::{
    downsample_2x2, sample_image_batch, sample_from_source, transitions_to_batch, DatasetSource, ImageDataset,
    ImageTransition, DEFAULT_IMAGE_BATCH, MNIST_TEST_IMAGES, MNIST_TEST_LABELS,
};
pub use mountain_car::{
    mc_reset, mc_step, smc_step, McStep, MountainCarState, NoiseVariant, SmcStep, StochMountainCarState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvId {
    MountainCar,
    SmcFrozen,
    SmcEvolving,
    StochasticImage,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::MountainCar, EnvId::SmcFrozen, EnvId::SmcEvolving, EnvId::StochasticImage];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::MountainCar => "mountain-car",
            EnvId::SmcFrozen => "smc-frozen",
            EnvId::SmcEvolving => "smc-evolving",
            EnvId::StochasticImage => "stochastic-image",
        }
    }

    pub fn is_control(&self) -> bool {
        !matches!(self, EnvId::StochasticImage)
    }

    /// Whether transitions contain a stochastic component.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, EnvId::MountainCar)
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown env `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_ids_roundtrip() {
        for e in EnvId::ALL {
            assert_eq!(e.as_str().parse::<EnvId>().unwrap(), e);
        }
        assert!("cartpole".parse::<EnvId>().is_err());
    }
}
