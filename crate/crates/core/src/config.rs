//! Experiment configuration: one JSON document per run.
//!
//! The schema is strict (unknown keys are rejected) and every command is a
//! pure function of (config file, master seed), so outputs are reproducible
//! byte for byte.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::env::{make_garnet_family, make_gridworld_family, GarnetSpec, GridSpec};
use crate::error::{Error, Result};
use crate::fed::FedConfig;
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::sweep::SweepSizes;
use crate::trainer::{Architecture, SoftmaxPolicy, TrainerConfig};
use crate::util::fnv1a64;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    Gridworld(GridSpec),
    Garnet(GarnetSpec),
    /// Pre-generated MDP documents, one per agent.
    MdpFiles(Vec<PathBuf>),
}

impl EnvSpec {
    pub fn build_family(&self) -> Result<Vec<FiniteMdp>> {
        let family = match self {
            EnvSpec::Gridworld(spec) => make_gridworld_family(spec)?,
            EnvSpec::Garnet(spec) => make_garnet_family(spec)?,
            EnvSpec::MdpFiles(paths) => {
                if paths.is_empty() {
                    return Err(Error::Config("mdp_files must list at least one file".into()));
                }
                let mut family = Vec::with_capacity(paths.len());
                for path in paths {
                    let text = std::fs::read_to_string(path)?;
                    family.push(FiniteMdp::from_json_str(&text)?);
                }
                family
            }
        };
        for mdp in &family {
            if !family[0].same_shape(mdp) {
                return Err(Error::Config("family members disagree in shape".into()));
            }
        }
        Ok(family)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default)]
    pub sizes: SweepSizes,
    /// Test-only: negates the federation-bound penalty so the sweep must
    /// report violations. Used to self-test the checker.
    #[serde(default)]
    pub inject_bug: bool,
}

fn default_sweeps() -> u64 {
    500
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { sweeps: default_sweeps(), sizes: SweepSizes::default(), inject_bug: false }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    #[default]
    Uniform,
    #[serde(untagged)]
    Checkpoint { checkpoint: PathBuf },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub policy: PolicyChoice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub env: Option<EnvSpec>,
    #[serde(default)]
    pub fed: Option<FedConfig>,
    #[serde(default)]
    pub trainer: Option<TrainerConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A parsed config plus the fingerprint of the raw bytes it came from.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub config_hash: String,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(fed) = &config.fed {
            fed.validate()?;
        }
        if let Some(trainer) = &config.trainer {
            trainer.validate()?;
        }
        Ok(Self { config, config_hash: format!("{:016x}", fnv1a64(&bytes)) })
    }
}

impl ExperimentConfig {
    pub fn env(&self) -> Result<&EnvSpec> {
        self.env.as_ref().ok_or_else(|| Error::Config("config is missing the env section".into()))
    }

    pub fn fed(&self) -> Result<&FedConfig> {
        self.fed.as_ref().ok_or_else(|| Error::Config("config is missing the fed section".into()))
    }

    pub fn trainer(&self) -> Result<&TrainerConfig> {
        self.trainer
            .as_ref()
            .ok_or_else(|| Error::Config("config is missing the trainer section".into()))
    }
}

/// Loads the policy an analysis runs under: uniform by default, otherwise a
/// checkpoint (either sampled-trainer parameters or an exact policy table).
pub fn resolve_analysis_policy(
    choice: &PolicyChoice,
    n_states: usize,
    n_actions: usize,
) -> Result<TabularPolicy> {
    match choice {
        PolicyChoice::Uniform => Ok(TabularPolicy::uniform(n_states, n_actions)),
        PolicyChoice::Checkpoint { checkpoint } => {
            let text = std::fs::read_to_string(checkpoint)?;
            let policy = load_checkpoint_policy(&text)?;
            if policy.n_states() != n_states || policy.n_actions() != n_actions {
                return Err(Error::Shape(format!(
                    "checkpoint policy is {}x{}, environment expects {}x{}",
                    policy.n_states(),
                    policy.n_actions(),
                    n_states,
                    n_actions
                )));
            }
            Ok(policy)
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CheckpointDoc {
    Sampled { architecture: Architecture, theta: Vec<f64> },
    Exact { policy_table: Vec<Vec<f64>> },
}

pub fn load_checkpoint_policy(text: &str) -> Result<TabularPolicy> {
    match serde_json::from_str::<CheckpointDoc>(text)? {
        CheckpointDoc::Sampled { architecture, theta } => {
            Ok(SoftmaxPolicy::from_parts(architecture, theta)?.to_tabular())
        }
        CheckpointDoc::Exact { policy_table } => TabularPolicy::new(policy_table),
    }
}
