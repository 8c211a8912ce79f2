//! Federated orchestration: configuration, agent selection, aggregation and
//! the run history shared by the exact and sampled training loops.

mod exact;

pub use exact::{
    optimize_local_objective, optimize_local_objective_from, run_federated_policy_iteration,
    PenaltyCoefficients,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ExactTabular,
    Fedkl,
    Fedavg,
    Fedprox,
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::ExactTabular => "exact-tabular",
            Algorithm::Fedkl => "fedkl",
            Algorithm::Fedavg => "fedavg",
            Algorithm::Fedprox => "fedprox",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "exact-tabular" => Ok(Algorithm::ExactTabular),
            "fedkl" => Ok(Algorithm::Fedkl),
            "fedavg" => Ok(Algorithm::Fedavg),
            "fedprox" => Ok(Algorithm::Fedprox),
            other => Err(Error::Config(format!("unknown algorithm tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FedConfig {
    pub n_agents: usize,
    /// K agents participate per round.
    pub participants_per_round: usize,
    /// I local iterations per round (sampled loop).
    #[serde(default = "default_one")]
    pub local_iters: usize,
    /// T sampled timesteps per iteration.
    #[serde(default = "default_timesteps")]
    pub timesteps: usize,
    /// E optimization epochs per iteration.
    #[serde(default = "default_one")]
    pub epochs: usize,
    /// Aggregation weights q_n; mutually exclusive with `sample_counts`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Per-agent sample counts l_n, yielding q_n = l_n / L.
    #[serde(default)]
    pub sample_counts: Option<Vec<u64>>,
    pub rounds: usize,
    pub master_seed: u64,
    pub algorithm: Algorithm,
    #[serde(default = "default_d_local")]
    pub d_local: f64,
    #[serde(default = "default_d_global")]
    pub d_global: f64,
    #[serde(default = "default_one_f")]
    pub c1_init: f64,
    #[serde(default = "default_one_f")]
    pub c2_init: f64,
    #[serde(default = "default_fedprox_mu")]
    pub fedprox_mu: f64,
    /// Record per-round heterogeneity snapshots in the history.
    #[serde(default = "default_true")]
    pub record_heterogeneity: bool,
}

fn default_one() -> usize {
    1
}
fn default_timesteps() -> usize {
    256
}
fn default_one_f() -> f64 {
    1.0
}
fn default_d_local() -> f64 {
    0.003
}
fn default_d_global() -> f64 {
    0.5
}
fn default_fedprox_mu() -> f64 {
    0.02
}
fn default_true() -> bool {
    true
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be positive".into()));
        }
        if self.participants_per_round == 0 || self.participants_per_round > self.n_agents {
            return Err(Error::Config(format!(
                "participants_per_round {} must lie in 1..={}",
                self.participants_per_round, self.n_agents
            )));
        }
        if self.weights.is_some() && self.sample_counts.is_some() {
            return Err(Error::Config("give either weights or sample_counts, not both".into()));
        }
        if let Some(w) = &self.weights {
            crate::hetero::check_weights(w, self.n_agents)?;
        }
        if let Some(l) = &self.sample_counts {
            if l.len() != self.n_agents {
                return Err(Error::Config("sample_counts must have one entry per agent".into()));
            }
            if l.iter().any(|&x| x == 0) {
                return Err(Error::Config("sample_counts must be positive".into()));
            }
        }
        if self.algorithm != Algorithm::ExactTabular {
            if self.d_local <= 0.0 || self.d_global <= 0.0 {
                return Err(Error::Config("d_local and d_global must be positive".into()));
            }
            if self.c1_init < 0.0 || self.c2_init < 0.0 {
                return Err(Error::Config("penalty coefficients must be nonnegative".into()));
            }
            if self.timesteps == 0 {
                return Err(Error::Config("timesteps must be positive".into()));
            }
        }
        Ok(())
    }

    /// Normalized federation weights from `weights`, `sample_counts`, or
    /// uniform when neither is given.
    pub fn effective_weights(&self) -> Vec<f64> {
        if let Some(w) = &self.weights {
            return w.clone();
        }
        if let Some(l) = &self.sample_counts {
            let total: u64 = l.iter().sum();
            return l.iter().map(|&x| x as f64 / total as f64).collect();
        }
        vec![1.0 / self.n_agents as f64; self.n_agents]
    }

    /// Aggregation count l_n for one agent (1 when not configured).
    pub fn sample_count(&self, agent: usize) -> u64 {
        self.sample_counts.as_ref().map_or(1, |l| l[agent])
    }
}

/// Per-iteration statistics from a sampled local round.
#[derive(Debug, Clone, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_local_kl: f64,
    pub mean_global_sqrtkl: f64,
    pub c1: f64,
    pub c2: f64,
    pub surrogate: f64,
    pub mean_advantage: f64,
    pub value_loss: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentRoundRecord {
    pub agent: usize,
    /// Exact local return of the broadcast policy on this agent's MDP.
    pub eta_local: f64,
    /// Exact penalized local objective reached (exact loop only).
    pub h_value: Option<f64>,
    pub b_norm: Option<f64>,
    pub g_scaled: Option<f64>,
    pub final_c1: Option<f64>,
    pub final_c2: Option<f64>,
    pub iterations: Vec<IterationStats>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Exact weighted global return of the policy held at round start.
    pub eta_global: f64,
    /// Monte-Carlo estimate of the same quantity (sampled loop only).
    pub eta_mc: Option<f64>,
    pub agents: Vec<AgentRoundRecord>,
}

/// The policy a run ends with, in checkpoint form.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum FinalPolicy {
    Table { policy_table: Vec<Vec<f64>> },
    Parameters { architecture: crate::trainer::Architecture, theta: Vec<f64> },
}

/// Per-round record of a federated run. The final entry evaluates the last
/// aggregated policy and carries no agent records.
#[derive(Debug, Clone, Serialize)]
pub struct FedHistory {
    pub algorithm: &'static str,
    pub rounds: Vec<RoundRecord>,
    pub final_policy: FinalPolicy,
}

impl FedHistory {
    pub fn eta_series(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.eta_global).collect()
    }
}

const SELECT_LABEL: u64 = 0x7365_6c65_6374;

/// Uniform subset of K agents without replacement, deterministic in
/// (seed, round), returned sorted.
pub fn select_agents(n_agents: usize, k: usize, round: usize, master_seed: u64) -> Vec<usize> {
    let mut stream = RngStream::derive(master_seed, &[SELECT_LABEL, round as u64]);
    stream.sample_without_replacement(n_agents, k)
}

/// Probability-space aggregation: per-(s,a) convex combination.
pub fn aggregate_policies(policies: &[TabularPolicy], weights: &[f64]) -> Result<TabularPolicy> {
    if policies.is_empty() || policies.len() != weights.len() {
        return Err(Error::Shape("one weight per policy required".into()));
    }
    let n_states = policies[0].n_states();
    let n_actions = policies[0].n_actions();
    let mut rows = vec![vec![0.0; n_actions]; n_states];
    for (pi, &q) in policies.iter().zip(weights) {
        if pi.n_states() != n_states || pi.n_actions() != n_actions {
            return Err(Error::Shape("policies disagree in shape".into()));
        }
        for (s, row) in rows.iter_mut().enumerate() {
            for (a, x) in row.iter_mut().enumerate() {
                *x += q * pi.prob(s, a);
            }
        }
    }
    TabularPolicy::new(rows)
}

/// Parameter-space aggregation with weights l_k / L.
pub fn aggregate_parameters(params: &[Vec<f64>], counts: &[u64]) -> Result<Vec<f64>> {
    if params.is_empty() || params.len() != counts.len() {
        return Err(Error::Shape("one count per parameter vector required".into()));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Config("sample counts must be positive".into()));
    }
    let dim = params[0].len();
    if params.iter().any(|p| p.len() != dim) {
        return Err(Error::Shape("parameter vectors disagree in length".into()));
    }
    let total: u64 = counts.iter().sum();
    let mut out = vec![0.0; dim];
    for (theta, &l) in params.iter().zip(counts) {
        let w = l as f64 / total as f64;
        for (o, &x) in out.iter_mut().zip(theta) {
            *o += w * x;
        }
    }
    Ok(out)
}
