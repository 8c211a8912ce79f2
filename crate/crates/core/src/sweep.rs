//! Seeded randomized instances for the bound-certification sweeps.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    check_advantage_linearity, check_cpo_bound, check_federation_advantage_bound,
    check_global_return_bound, check_mixture_tv, check_pinsker, check_trpo_bound, BoundCheck,
};
use crate::error::Result;
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::rng::RngStream;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSizes {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_agents: usize,
}

impl Default for SweepSizes {
    fn default() -> Self {
        Self { max_states: 12, max_actions: 4, max_agents: 5 }
    }
}

#[derive(Debug)]
pub struct SweepRecord {
    pub seed: u64,
    pub check: BoundCheck,
}

pub fn random_simplex(stream: &mut RngStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - stream.next_f64()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_mdp(
    stream: &mut RngStream,
    n_states: usize,
    n_actions: usize,
    gamma: f64,
) -> FiniteMdp {
    let mu = random_simplex(stream, n_states);
    let reward: Vec<Vec<f64>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| stream.next_f64() * 2.0 - 1.0).collect())
        .collect();
    let transition: Vec<Vec<Vec<f64>>> = (0..n_states)
        .map(|_| (0..n_actions).map(|_| random_simplex(stream, n_states)).collect())
        .collect();
    FiniteMdp::new(n_states, n_actions, gamma, mu, reward, transition)
        .expect("randomly generated tables are valid by construction")
}

pub fn random_policy(stream: &mut RngStream, n_states: usize, n_actions: usize) -> TabularPolicy {
    let probs = (0..n_states).map(|_| random_simplex(stream, n_actions)).collect();
    TabularPolicy::new(probs).expect("simplex rows are valid policy rows")
}

pub struct SweepInstance {
    pub family: Vec<FiniteMdp>,
    pub weights: Vec<f64>,
    pub pi: TabularPolicy,
    pub pi2: TabularPolicy,
    pub agent: usize,
}

pub fn random_instance(master_seed: u64, seed: u64, sizes: &SweepSizes) -> SweepInstance {
    let mut stream = RngStream::derive(master_seed, &[0x7377_6565_70, seed]);
    let n_states = 2 + stream.gen_range(sizes.max_states - 1);
    let n_actions = 2 + stream.gen_range(sizes.max_actions - 1);
    let n_agents = 1 + stream.gen_range(sizes.max_agents);
    let gamma = 0.3 + 0.6 * stream.next_f64();
    let family: Vec<FiniteMdp> =
        (0..n_agents).map(|_| random_mdp(&mut stream, n_states, n_actions, gamma)).collect();
    let weights = random_simplex(&mut stream, n_agents);
    let pi = random_policy(&mut stream, n_states, n_actions);
    let pi2 = random_policy(&mut stream, n_states, n_actions);
    let agent = stream.gen_range(n_agents);
    SweepInstance { family, weights, pi, pi2, agent }
}

/// Runs the full battery of checks on `n_seeds` random instances.
/// `inject_bug` negates the federation-bound penalty so that the sweep must
/// detect violations; it exists to self-test the checker.
pub fn run_bound_sweep(
    n_seeds: u64,
    master_seed: u64,
    sizes: &SweepSizes,
    inject_bug: bool,
) -> Result<Vec<SweepRecord>> {
    let mut records = Vec::new();
    for seed in 0..n_seeds {
        let inst = random_instance(master_seed, seed, sizes);
        let mut stream = RngStream::derive(master_seed, &[0x6368_6563_6b73, seed]);

        records.push(SweepRecord {
            seed,
            check: check_trpo_bound(&inst.family[0], &inst.pi, &inst.pi2)?,
        });
        records.push(SweepRecord {
            seed,
            check: check_cpo_bound(&inst.family[0], &inst.pi, &inst.pi2)?,
        });
        records.push(SweepRecord {
            seed,
            check: check_federation_advantage_bound(
                &inst.family,
                &inst.weights,
                &inst.pi,
                &inst.pi2,
                inst.agent,
                inject_bug,
            )?,
        });
        records.push(SweepRecord {
            seed,
            check: check_global_return_bound(
                &inst.family,
                &inst.weights,
                &inst.pi,
                &inst.pi2,
                inst.agent,
            )?,
        });

        let atoms = 2 + stream.gen_range(15);
        let p = random_simplex(&mut stream, atoms);
        let q = random_simplex(&mut stream, atoms);
        records.push(SweepRecord { seed, check: check_pinsker(&p, &q) });

        let locals: Vec<TabularPolicy> = (0..inst.family.len())
            .map(|_| random_policy(&mut stream, inst.pi.n_states(), inst.pi.n_actions()))
            .collect();
        records
            .push(SweepRecord { seed, check: check_mixture_tv(&locals, &inst.weights, &inst.pi)? });

        let w = stream.next_f64();
        records.push(SweepRecord {
            seed,
            check: check_advantage_linearity(&inst.family[0], &inst.pi, &inst.pi2, &locals[0], w)?,
        });
    }
    Ok(records)
}
