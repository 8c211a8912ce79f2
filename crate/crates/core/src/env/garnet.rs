//! Random Garnet-style MDP families.
//!
//! A seeded base MDP is drawn with the usual (states, actions, branching)
//! construction; each agent then gets a convex perturbation of the base
//! transitions and/or initial distribution, so perturbation 0 reproduces the
//! IID family exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarnetSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// Number of reachable successor states per (s, a) in the base MDP.
    pub branching: usize,
    /// Fraction of (s, a) pairs carrying a nonzero reward.
    pub reward_sparsity: f64,
    pub seed: u64,
    pub n_agents: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Mixing weight toward an agent-specific random transition tensor.
    #[serde(default)]
    pub transition_perturbation: f64,
    /// Mixing weight toward an agent-specific random initial distribution.
    #[serde(default)]
    pub mu_perturbation: f64,
}

fn default_gamma() -> f64 {
    0.9
}

impl GarnetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 || self.n_agents == 0 {
            return Err(Error::Config("garnet counts must be positive".into()));
        }
        if self.branching == 0 || self.branching > self.n_states {
            return Err(Error::Config(format!(
                "branching {} must lie in 1..={}",
                self.branching, self.n_states
            )));
        }
        if !(0.0..=1.0).contains(&self.reward_sparsity) {
            return Err(Error::Config("reward_sparsity must lie in [0, 1]".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.transition_perturbation)
            || !(0.0..=1.0).contains(&self.mu_perturbation)
        {
            return Err(Error::Config("perturbation magnitudes must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn random_simplex(stream: &mut RngStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - stream.next_f64()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn make_garnet_family(spec: &GarnetSpec) -> Result<Vec<FiniteMdp>> {
    spec.validate()?;
    let n = spec.n_states;
    let mut stream = RngStream::derive(spec.seed, &[0x6172_6e65]);

    let mut base_p = vec![vec![vec![0.0; n]; spec.n_actions]; n];
    for s in 0..n {
        for a in 0..spec.n_actions {
            let succ = stream.sample_without_replacement(n, spec.branching);
            let weights = random_simplex(&mut stream, spec.branching);
            for (i, &s2) in succ.iter().enumerate() {
                base_p[s][a][s2] = weights[i];
            }
        }
    }
    let mut reward = vec![vec![0.0; spec.n_actions]; n];
    for s in 0..n {
        for a in 0..spec.n_actions {
            let active = stream.next_f64() < spec.reward_sparsity;
            let value = stream.next_f64();
            if active {
                reward[s][a] = value;
            }
        }
    }
    let base_mu = random_simplex(&mut stream, n);

    let mut family = Vec::with_capacity(spec.n_agents);
    for agent in 0..spec.n_agents {
        let mut agent_stream = RngStream::derive(spec.seed, &[0x7065_7274, agent as u64]);
        let tp = spec.transition_perturbation;
        let mp = spec.mu_perturbation;
        let mut transition = base_p.clone();
        if tp > 0.0 {
            for per_a in transition.iter_mut() {
                for row in per_a.iter_mut() {
                    let noise = random_simplex(&mut agent_stream, n);
                    for (p, z) in row.iter_mut().zip(&noise) {
                        *p = (1.0 - tp) * *p + tp * z;
                    }
                }
            }
        }
        let mu = if mp > 0.0 {
            let noise = random_simplex(&mut agent_stream, n);
            base_mu.iter().zip(&noise).map(|(&m, &z)| (1.0 - mp) * m + mp * z).collect()
        } else {
            base_mu.clone()
        };
        family.push(FiniteMdp::new(n, spec.n_actions, spec.gamma, mu, reward.clone(), transition)?);
    }
    Ok(family)
}
