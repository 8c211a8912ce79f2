//! The sampled federated training loop.
//!
//! Rounds of select -> broadcast -> local training -> parameter averaging.
//! The actor parameters are aggregated with weights l_k / L over the
//! selected agents; critics stay local to their agents across rounds. The
//! penalty controller restarts from the configured initial coefficients at
//! every round, and the FedAvg / FedProx variants pin the global coefficient
//! to zero (FedProx additionally pulls parameters toward the broadcast
//! vector).

use crate::env::mean_episode_return;
use crate::error::{Error, Result};
use crate::fed::{
    aggregate_parameters, select_agents, AgentRoundRecord, Algorithm, FedConfig, FedHistory,
    FinalPolicy, RoundRecord,
};
use crate::hetero::{heterogeneity_report, uniform_weights, HeterogeneityReport};
use crate::mdp::FiniteMdp;
use crate::rng::RngStream;
use crate::trainer::controller::PenaltyController;
use crate::trainer::local::local_round;
use crate::trainer::net::{Architecture, SoftmaxPolicy, ValueArch, ValueEstimator};
use crate::trainer::{ParamKind, TrainerConfig};
use crate::util::parallel_map;

const INIT_LABEL: u64 = 0x696e_6974;
const LOCAL_LABEL: u64 = 0x6c6f_6361_6c;
const EVAL_LABEL: u64 = 0x6576_616c;

fn exact_global_return(
    family: &[FiniteMdp],
    weights: &[f64],
    policy: &SoftmaxPolicy,
) -> Result<(f64, Vec<f64>)> {
    let tab = policy.to_tabular();
    let mut locals = Vec::with_capacity(family.len());
    for mdp in family {
        locals.push(mdp.expected_return(&tab)?);
    }
    let global = weights.iter().zip(&locals).map(|(q, e)| q * e).sum();
    Ok((global, locals))
}

fn mc_global_return(
    family: &[FiniteMdp],
    weights: &[f64],
    policy: &SoftmaxPolicy,
    trainer: &TrainerConfig,
    master_seed: u64,
    round: usize,
) -> f64 {
    let tab = policy.to_tabular();
    family
        .iter()
        .enumerate()
        .map(|(k, mdp)| {
            let mut stream = RngStream::derive(master_seed, &[EVAL_LABEL, round as u64, k as u64]);
            weights[k]
                * mean_episode_return(
                    mdp,
                    &tab,
                    trainer.eval_episodes,
                    trainer.max_episode_len,
                    &mut stream,
                )
        })
        .sum()
}

fn hetero_snapshot(
    family: &[FiniteMdp],
    weights: &[f64],
    policy: &SoftmaxPolicy,
) -> Result<Option<HeterogeneityReport>> {
    match heterogeneity_report(family, weights, &policy.to_tabular()) {
        Ok(report) => Ok(Some(report)),
        // saturated policies can starve states of visitation mass; the
        // snapshot is diagnostic, so record the gap instead of aborting
        Err(Error::UnreachableState { .. }) => Ok(None),
        Err(other) => Err(other),
    }
}

pub fn run_fedkl(
    fed: &FedConfig,
    trainer: &TrainerConfig,
    family: &[FiniteMdp],
    workers: usize,
) -> Result<FedHistory> {
    fed.validate()?;
    trainer.validate()?;
    if fed.algorithm == Algorithm::ExactTabular {
        return Err(Error::Config("run_fedkl handles the sampled algorithm tags only".into()));
    }
    if fed.n_agents != family.len() {
        return Err(Error::Config(format!(
            "config declares {} agents but the family has {}",
            fed.n_agents,
            family.len()
        )));
    }
    for mdp in family {
        if !family[0].same_shape(mdp) {
            return Err(Error::Shape("family members disagree in shape".into()));
        }
    }
    let n_states = family[0].n_states();
    let n_actions = family[0].n_actions();
    let weights = if fed.weights.is_some() || fed.sample_counts.is_some() {
        fed.effective_weights()
    } else {
        uniform_weights(fed.n_agents)
    };

    let arch = match trainer.parameterization {
        ParamKind::TabularSoftmax => Architecture::TabularSoftmax { n_states, n_actions },
        ParamKind::Mlp => Architecture::Mlp { n_states, n_actions, hidden: trainer.hidden_width },
    };
    let mut policy = match trainer.parameterization {
        ParamKind::TabularSoftmax => SoftmaxPolicy::zeros(arch),
        ParamKind::Mlp => {
            let mut stream = RngStream::derive(fed.master_seed, &[INIT_LABEL]);
            SoftmaxPolicy::init_random(arch, trainer.init_scale, &mut stream)
        }
    };
    let value_arch = match trainer.parameterization {
        ParamKind::TabularSoftmax => ValueArch::Table { n_states },
        ParamKind::Mlp => ValueArch::Mlp { n_states, hidden: trainer.hidden_width },
    };
    let mut critics: Vec<ValueEstimator> = (0..fed.n_agents)
        .map(|agent| match value_arch {
            ValueArch::Table { .. } => ValueEstimator::zeros(value_arch),
            ValueArch::Mlp { .. } => {
                let mut stream = RngStream::derive(fed.master_seed, &[INIT_LABEL, 1, agent as u64]);
                ValueEstimator::init_random(value_arch, trainer.init_scale, &mut stream)
            }
        })
        .collect();

    let c1_init = match fed.algorithm {
        Algorithm::Fedkl => fed.c1_init,
        _ => 0.0,
    };

    let mut rounds = Vec::with_capacity(fed.rounds + 1);
    for t in 0..fed.rounds {
        let (eta_global, eta_locals) = exact_global_return(family, &weights, &policy)?;
        let eta_mc = mc_global_return(family, &weights, &policy, trainer, fed.master_seed, t);
        let report = if fed.record_heterogeneity {
            hetero_snapshot(family, &weights, &policy)?
        } else {
            None
        };

        let selected = select_agents(fed.n_agents, fed.participants_per_round, t, fed.master_seed);
        let outcomes: Vec<Result<_>> = parallel_map(selected.len(), workers, |idx| {
            let agent = selected[idx];
            let mut stream =
                RngStream::derive(fed.master_seed, &[LOCAL_LABEL, t as u64, agent as u64]);
            let mut critic = critics[agent].clone();
            let controller =
                PenaltyController::new(c1_init, fed.c2_init, fed.d_local, fed.d_global);
            let outcome = local_round(
                &family[agent],
                fed,
                trainer,
                &policy,
                &mut critic,
                controller,
                &mut stream,
            )?;
            Ok((agent, outcome, critic))
        });

        let mut agents = Vec::with_capacity(selected.len());
        let mut thetas = Vec::with_capacity(selected.len());
        let mut counts = Vec::with_capacity(selected.len());
        for result in outcomes {
            let (agent, outcome, critic) = result?;
            critics[agent] = critic;
            agents.push(AgentRoundRecord {
                agent,
                eta_local: eta_locals[agent],
                h_value: None,
                b_norm: report.as_ref().map(|r| r.agents[agent].b_norm),
                g_scaled: report.as_ref().map(|r| r.agents[agent].g_scaled),
                final_c1: Some(outcome.controller.c1),
                final_c2: Some(outcome.controller.c2),
                iterations: outcome.stats,
            });
            thetas.push(outcome.policy.theta);
            counts.push(fed.sample_count(agent));
        }
        rounds.push(RoundRecord { round: t, eta_global, eta_mc: Some(eta_mc), agents });

        policy.theta = aggregate_parameters(&thetas, &counts)?;
    }

    let (eta_global, _) = exact_global_return(family, &weights, &policy)?;
    let eta_mc = mc_global_return(family, &weights, &policy, trainer, fed.master_seed, fed.rounds);
    rounds.push(RoundRecord {
        round: fed.rounds,
        eta_global,
        eta_mc: Some(eta_mc),
        agents: Vec::new(),
    });

    Ok(FedHistory {
        algorithm: fed.algorithm.tag(),
        rounds,
        final_policy: FinalPolicy::Parameters { architecture: policy.arch(), theta: policy.theta },
    })
}
