//! Trajectory sampling for the Monte-Carlo training path.

use crate::error::{Error, Result};
use crate::mdp::{FiniteMdp, TabularPolicy};
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
    pub log_prob: f64,
}

/// A fixed-length batch of transitions. Episodes reset from `mu` whenever an
/// absorbing state is entered, so the batch can span several episodes.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub transitions: Vec<Transition>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Runs `policy` for exactly `t_steps` transitions, fully determined by the
/// rng stream.
pub fn sample_trajectory(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    t_steps: usize,
    stream: &mut RngStream,
) -> Result<TrajectoryBatch> {
    if t_steps == 0 {
        return Err(Error::Config("trajectory length must be at least 1".into()));
    }
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::Shape("policy does not match mdp".into()));
    }
    let absorbing = mdp.absorbing_states();
    let mut transitions = Vec::with_capacity(t_steps);
    let mut state = stream.sample_categorical(mdp.mu());
    for _ in 0..t_steps {
        let action = stream.sample_categorical(policy.row(state));
        let log_prob = policy.prob(state, action).ln();
        let next_state = stream.sample_categorical(mdp.transition_row(state, action));
        let reward = mdp.reward(state, action);
        let terminal = absorbing[next_state];
        transitions.push(Transition { state, action, reward, next_state, terminal, log_prob });
        state = if terminal { stream.sample_categorical(mdp.mu()) } else { next_state };
    }
    Ok(TrajectoryBatch { transitions })
}

/// Mean discounted episode return over `n_episodes`, each truncated at
/// `horizon` steps or on entering an absorbing state.
pub fn mean_episode_return(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    n_episodes: usize,
    horizon: usize,
    stream: &mut RngStream,
) -> f64 {
    let absorbing = mdp.absorbing_states();
    let mut total = 0.0;
    for _ in 0..n_episodes {
        let mut state = stream.sample_categorical(mdp.mu());
        let mut discount = 1.0;
        let mut ret = 0.0;
        for _ in 0..horizon {
            if absorbing[state] {
                break;
            }
            let action = stream.sample_categorical(policy.row(state));
            ret += discount * mdp.reward(state, action);
            discount *= mdp.gamma();
            state = stream.sample_categorical(mdp.transition_row(state, action));
        }
        total += ret;
    }
    total / n_episodes as f64
}
