//! The penalized importance-sampling surrogate and its gradient.
//!
//! Per batch step (s, a) with advantage estimate `A`:
//!
//! ```text
//! omega A - c1 sqrt(0.5 KL(pi_global(.|s) || pi_new(.|s)))
//!         - c2 KL(pi_prev(.|s) || pi_new(.|s))
//! ```
//!
//! with `omega = pi_new(a|s) / pi_prev(a|s)`, averaged over the minibatch.
//! The visitation-ratio part of the importance weight is dropped (the usual
//! low-variance simplification), so omega is a pure action-probability ratio.
//!
//! The sqrt penalty has an unbounded derivative at KL = 0, so the gradient
//! uses `sqrt(0.5 KL + 1e-12)` while the reported objective keeps the exact
//! value; controller measurements are likewise un-smoothed.

use crate::env::Transition;
use crate::mdp::kl_divergence;
use crate::trainer::net::SoftmaxPolicy;

const SQRT_SMOOTHING: f64 = 1e-12;

/// An optional parameter-space proximal pull toward the broadcast
/// parameters: adds `-(mu/2) ||theta - theta_global||^2` to the objective.
pub struct Proximal<'a> {
    pub mu: f64,
    pub theta_global: &'a [f64],
}

pub struct SurrogateEval {
    pub objective: f64,
    pub gradient: Vec<f64>,
}

/// Objective and reverse-accumulated gradient over the selected steps.
/// `prev_probs` / `global_probs` hold the frozen per-step distributions of
/// the iteration-start and broadcast policies.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_objective(
    steps: &[Transition],
    indices: &[usize],
    policy: &SoftmaxPolicy,
    prev_probs: &[Vec<f64>],
    global_probs: &[Vec<f64>],
    advantages: &[f64],
    c1: f64,
    c2: f64,
    prox: Option<&Proximal>,
) -> SurrogateEval {
    let m = indices.len().max(1) as f64;
    let inv_m = 1.0 / m;
    let mut objective = 0.0;
    let mut gradient = vec![0.0; policy.theta.len()];
    let n_actions = policy.arch().n_actions();
    let mut dlogits = vec![0.0; n_actions];

    for &i in indices {
        let step = &steps[i];
        let s = step.state;
        let a = step.action;
        let p = policy.probs(s);
        let prev = &prev_probs[i];
        let global = &global_probs[i];
        let omega = p[a] / prev[a];
        let kl_global = kl_divergence(global, &p);
        let kl_local = kl_divergence(prev, &p);
        objective +=
            inv_m * (omega * advantages[i] - c1 * (0.5 * kl_global).sqrt() - c2 * kl_local);

        // d objective / d logits at this state
        let sqrt_term = (0.5 * kl_global + SQRT_SMOOTHING).sqrt();
        let c1_scale = c1 / (4.0 * sqrt_term);
        for b in 0..n_actions {
            let indicator = if b == a { 1.0 } else { 0.0 };
            let d_ratio = omega * advantages[i] * (indicator - p[b]);
            let d_global = -c1_scale * (p[b] - global[b]);
            let d_local = -c2 * (p[b] - prev[b]);
            dlogits[b] = inv_m * (d_ratio + d_global + d_local);
        }
        policy.accumulate_logit_grad(s, &dlogits, &mut gradient);
    }

    if let Some(prox) = prox {
        let mut penalty = 0.0;
        for (i, (&t, &tg)) in policy.theta.iter().zip(prox.theta_global).enumerate() {
            let diff = t - tg;
            penalty += diff * diff;
            gradient[i] -= prox.mu * diff;
        }
        objective -= 0.5 * prox.mu * penalty;
    }

    SurrogateEval { objective, gradient }
}

/// Mean per-state KL of the iteration-start policy from the current one,
/// over the batch states: the controller's local measurement.
pub fn mean_local_kl(steps: &[Transition], policy: &SoftmaxPolicy, prev_probs: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (step, prev) in steps.iter().zip(prev_probs) {
        acc += kl_divergence(prev, &policy.probs(step.state));
    }
    acc / steps.len() as f64
}

/// Mean of `sqrt(0.5 KL(pi_global || pi_new))` over batch states: the
/// controller's global measurement.
pub fn mean_global_sqrt_kl(
    steps: &[Transition],
    policy: &SoftmaxPolicy,
    global_probs: &[Vec<f64>],
) -> f64 {
    let mut acc = 0.0;
    for (step, global) in steps.iter().zip(global_probs) {
        acc += (0.5 * kl_divergence(global, &policy.probs(step.state))).sqrt();
    }
    acc / steps.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sample_trajectory;
    use crate::mdp::testkit::two_state_chain;
    use crate::mdp::TabularPolicy;
    use crate::rng::RngStream;
    use crate::trainer::net::Architecture;

    fn frozen_probs(policy: &SoftmaxPolicy, steps: &[Transition]) -> Vec<Vec<f64>> {
        steps.iter().map(|t| policy.probs(t.state)).collect()
    }

    fn chain_batch(seed: u64, len: usize) -> Vec<Transition> {
        let mdp = two_state_chain(0.9);
        let mut stream = RngStream::from_seed(seed);
        sample_trajectory(&mdp, &TabularPolicy::uniform(2, 2), len, &mut stream)
            .unwrap()
            .transitions
    }

    #[test]
    fn identical_policies_reduce_to_mean_advantage() {
        let steps = chain_batch(3, 50);
        let arch = Architecture::TabularSoftmax { n_states: 2, n_actions: 2 };
        let mut stream = RngStream::from_seed(9);
        let mut policy = SoftmaxPolicy::zeros(arch);
        for x in policy.theta.iter_mut() {
            *x = stream.next_f64() - 0.5;
        }
        let prev = frozen_probs(&policy, &steps);
        let global = frozen_probs(&policy, &steps);
        let advantages: Vec<f64> =
            (0..steps.len()).map(|_| stream.next_f64() * 2.0 - 1.0).collect();
        let indices: Vec<usize> = (0..steps.len()).collect();
        let eval = surrogate_objective(
            &steps,
            &indices,
            &policy,
            &prev,
            &global,
            &advantages,
            3.0,
            5.0,
            None,
        );
        let mean_adv: f64 = advantages.iter().sum::<f64>() / advantages.len() as f64;
        assert!(
            (eval.objective - mean_adv).abs() < 1e-12,
            "objective {} vs mean advantage {mean_adv}",
            eval.objective
        );
    }

    #[test]
    fn zero_penalties_give_plain_importance_weighted_gradient() {
        let steps = chain_batch(5, 40);
        let arch = Architecture::TabularSoftmax { n_states: 2, n_actions: 2 };
        let mut stream = RngStream::from_seed(31);
        let mut prev_policy = SoftmaxPolicy::zeros(arch);
        for x in prev_policy.theta.iter_mut() {
            *x = stream.next_f64() - 0.5;
        }
        let mut policy = prev_policy.clone();
        for x in policy.theta.iter_mut() {
            *x += 0.3 * (stream.next_f64() - 0.5);
        }
        let prev = frozen_probs(&prev_policy, &steps);
        let global = frozen_probs(&prev_policy, &steps);
        let advantages: Vec<f64> = (0..steps.len()).map(|_| stream.next_f64() - 0.5).collect();
        let indices: Vec<usize> = (0..steps.len()).collect();
        let eval = surrogate_objective(
            &steps,
            &indices,
            &policy,
            &prev,
            &global,
            &advantages,
            0.0,
            0.0,
            None,
        );
        // objective equals mean omega * A directly
        let mut expect = 0.0;
        for (i, step) in steps.iter().enumerate() {
            let p = policy.probs(step.state);
            expect += p[step.action] / prev[i][step.action] * advantages[i];
        }
        expect /= steps.len() as f64;
        assert!((eval.objective - expect).abs() < 1e-12);
    }

    fn fd_check(arch: Architecture, seed: u64, with_prox: bool) {
        let steps = chain_batch(seed, 30);
        let mut stream = RngStream::from_seed(seed ^ 0xabcd);
        let mut prev_policy = SoftmaxPolicy::init_random(arch, 0.6, &mut stream);
        for x in prev_policy.theta.iter_mut() {
            *x += 0.2 * (stream.next_f64() - 0.5);
        }
        let mut global_policy = prev_policy.clone();
        for x in global_policy.theta.iter_mut() {
            *x += 0.2 * (stream.next_f64() - 0.5);
        }
        let mut policy = prev_policy.clone();
        for x in policy.theta.iter_mut() {
            *x += 0.2 * (stream.next_f64() - 0.5);
        }
        let prev = frozen_probs(&prev_policy, &steps);
        let global = frozen_probs(&global_policy, &steps);
        let advantages: Vec<f64> =
            (0..steps.len()).map(|_| stream.next_f64() * 2.0 - 1.0).collect();
        let indices: Vec<usize> = (0..steps.len()).collect();
        let theta_global = global_policy.theta.clone();
        let prox = Proximal { mu: 0.05, theta_global: &theta_global };
        let prox_opt = if with_prox { Some(&prox) } else { None };

        let eval = surrogate_objective(
            &steps,
            &indices,
            &policy,
            &prev,
            &global,
            &advantages,
            0.7,
            1.3,
            prox_opt,
        );
        let eps = 1e-6;
        for i in 0..policy.theta.len() {
            let mut plus = policy.clone();
            plus.theta[i] += eps;
            let mut minus = policy.clone();
            minus.theta[i] -= eps;
            let op = surrogate_objective(
                &steps,
                &indices,
                &plus,
                &prev,
                &global,
                &advantages,
                0.7,
                1.3,
                prox_opt,
            )
            .objective;
            let om = surrogate_objective(
                &steps,
                &indices,
                &minus,
                &prev,
                &global,
                &advantages,
                0.7,
                1.3,
                prox_opt,
            )
            .objective;
            let fd = (op - om) / (2.0 * eps);
            let denom = fd.abs().max(eval.gradient[i].abs()).max(1e-6);
            assert!(
                (fd - eval.gradient[i]).abs() / denom < 1e-4,
                "param {i}: fd {fd} vs grad {}",
                eval.gradient[i]
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_tabular() {
        fd_check(Architecture::TabularSoftmax { n_states: 2, n_actions: 2 }, 41, false);
        fd_check(Architecture::TabularSoftmax { n_states: 2, n_actions: 2 }, 43, true);
    }

    #[test]
    fn gradient_matches_finite_differences_mlp() {
        fd_check(Architecture::Mlp { n_states: 2, n_actions: 2, hidden: 4 }, 47, false);
    }

    #[test]
    fn kl_measurements_are_zero_for_identical_policies() {
        let steps = chain_batch(11, 20);
        let arch = Architecture::TabularSoftmax { n_states: 2, n_actions: 2 };
        let policy = SoftmaxPolicy::zeros(arch);
        let prev = frozen_probs(&policy, &steps);
        assert_eq!(mean_local_kl(&steps, &policy, &prev), 0.0);
        assert_eq!(mean_global_sqrt_kl(&steps, &policy, &prev), 0.0);
    }
}
