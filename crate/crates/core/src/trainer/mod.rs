//! Sampled local training: advantage estimation, the penalized surrogate,
//! the adaptive coefficient controller and the federated loop around them.

mod controller;
mod gae;
mod local;
mod net;
mod run;
mod surrogate;

pub use controller::{PenaltyController, BAND, SCALE};
pub use gae::gae_advantages;
pub use local::{local_round, LocalRoundOutcome};
pub use net::{softmax, Architecture, SoftmaxPolicy, ValueArch, ValueEstimator};
pub use run::run_fedkl;
pub use surrogate::{
    mean_global_sqrt_kl, mean_local_kl, surrogate_objective, Proximal, SurrogateEval,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    TabularSoftmax,
    Mlp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub parameterization: ParamKind,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    pub learning_rate: f64,
    /// Critic learning rate; defaults to the policy learning rate.
    #[serde(default)]
    pub value_learning_rate: Option<f64>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Advantage-estimation decay.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Evaluation episodes per agent for the Monte-Carlo return column.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_max_episode_len")]
    pub max_episode_len: usize,
    /// Critic regression epochs per iteration.
    #[serde(default = "default_value_epochs")]
    pub value_epochs: usize,
    /// Weight scale for random MLP initialization.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_hidden() -> usize {
    16
}
fn default_batch_size() -> usize {
    64
}
fn default_lambda() -> f64 {
    0.95
}
fn default_eval_episodes() -> usize {
    16
}
fn default_max_episode_len() -> usize {
    200
}
fn default_value_epochs() -> usize {
    5
}
fn default_init_scale() -> f64 {
    0.05
}

impl TrainerConfig {
    pub fn value_lr(&self) -> f64 {
        self.value_learning_rate.unwrap_or(self.learning_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || self.value_lr() < 0.0 {
            return Err(Error::Config("learning rates must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.parameterization == ParamKind::Mlp && self.hidden_width == 0 {
            return Err(Error::Config("hidden_width must be positive for the mlp".into()));
        }
        if self.eval_episodes == 0 || self.max_episode_len == 0 {
            return Err(Error::Config("evaluation budget must be positive".into()));
        }
        Ok(())
    }
}
