//! Exponentially weighted advantage estimation from sampled batches.

use crate::env::TrajectoryBatch;
use crate::trainer::net::ValueEstimator;

/// Backward-recursive advantage estimates and value-regression targets.
///
/// `adv_t = delta_t + gamma lambda (1 - terminal_t) adv_{t+1}` with
/// `delta_t = r_t + gamma V(s_{t+1}) (1 - terminal_t) - V(s_t)`, truncated at
/// the batch end; targets are `adv_t + V(s_t)`.
pub fn gae_advantages(
    batch: &TrajectoryBatch,
    values: &ValueEstimator,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = batch.len();
    let mut advantages = vec![0.0; n];
    let mut targets = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let tr = &batch.transitions[t];
        let not_terminal = if tr.terminal { 0.0 } else { 1.0 };
        let v_s = values.predict(tr.state);
        let v_next = values.predict(tr.next_state);
        let delta = tr.reward + gamma * v_next * not_terminal - v_s;
        carry = delta + gamma * lambda * not_terminal * carry;
        advantages[t] = carry;
        targets[t] = carry + v_s;
    }
    (advantages, targets)
}
