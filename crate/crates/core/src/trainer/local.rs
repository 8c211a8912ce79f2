//! One agent's local training round: sample, estimate advantages, ascend the
//! penalized surrogate, adapt the penalty coefficients.

use crate::env::{sample_trajectory, Transition};
use crate::error::Result;
use crate::fed::{Algorithm, FedConfig, IterationStats};
use crate::mdp::FiniteMdp;
use crate::rng::RngStream;
use crate::trainer::controller::PenaltyController;
use crate::trainer::gae::gae_advantages;
use crate::trainer::net::{SoftmaxPolicy, ValueEstimator};
use crate::trainer::surrogate::{
    mean_global_sqrt_kl, mean_local_kl, surrogate_objective, Proximal,
};
use crate::trainer::TrainerConfig;

pub struct LocalRoundOutcome {
    pub policy: SoftmaxPolicy,
    pub controller: PenaltyController,
    pub stats: Vec<IterationStats>,
}

fn minibatches(order: &[usize], batch_size: usize) -> impl Iterator<Item = &[usize]> {
    order.chunks(batch_size.max(1))
}

fn fit_value(
    critic: &mut ValueEstimator,
    steps: &[Transition],
    targets: &[f64],
    epochs: usize,
    batch_size: usize,
    lr: f64,
    stream: &mut RngStream,
) -> f64 {
    let n = steps.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; critic.theta.len()];
    for _ in 0..epochs {
        stream.shuffle(&mut order);
        for chunk in minibatches(&order, batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let s = steps[i].state;
                let err = critic.predict(s) - targets[i];
                critic.accumulate_grad(s, 2.0 * err * inv, &mut grad);
            }
            for (t, g) in critic.theta.iter_mut().zip(&grad) {
                *t -= lr * g;
            }
        }
    }
    // final mean-squared error over the batch
    steps
        .iter()
        .zip(targets)
        .map(|(step, &target)| {
            let err = critic.predict(step.state) - target;
            err * err
        })
        .sum::<f64>()
        / n as f64
}

/// Runs `fed.local_iters` iterations of sample / fit critic / ascend
/// surrogate / adapt coefficients, starting from the broadcast policy.
///
/// A non-finite objective or gradient aborts the iteration, restores the
/// pre-iteration parameters and marks the iteration in the stats; the
/// controller is left untouched for that iteration.
pub fn local_round(
    mdp: &FiniteMdp,
    fed: &FedConfig,
    trainer: &TrainerConfig,
    pi_global: &SoftmaxPolicy,
    critic: &mut ValueEstimator,
    mut controller: PenaltyController,
    stream: &mut RngStream,
) -> Result<LocalRoundOutcome> {
    let mut policy = pi_global.clone();
    let mut stats = Vec::with_capacity(fed.local_iters);
    let prox_theta = pi_global.theta.clone();

    for iteration in 0..fed.local_iters {
        let policy_backup = policy.clone();
        let critic_backup = critic.clone();
        let pi_prev = policy.clone();

        let batch = sample_trajectory(mdp, &pi_prev.to_tabular(), fed.timesteps, stream)?;
        let steps = &batch.transitions;
        let prev_probs: Vec<Vec<f64>> = steps.iter().map(|t| pi_prev.probs(t.state)).collect();
        let global_probs: Vec<Vec<f64>> = steps.iter().map(|t| pi_global.probs(t.state)).collect();

        let (advantages, targets) = gae_advantages(&batch, critic, mdp.gamma(), trainer.lambda);
        let mean_advantage = advantages.iter().sum::<f64>() / advantages.len() as f64;
        let value_loss = fit_value(
            critic,
            steps,
            &targets,
            trainer.value_epochs,
            trainer.batch_size,
            trainer.value_lr(),
            stream,
        );

        let prox = Proximal { mu: fed.fedprox_mu, theta_global: &prox_theta };
        let prox_opt = (fed.algorithm == Algorithm::Fedprox).then_some(&prox);

        let mut aborted = false;
        let mut order: Vec<usize> = (0..steps.len()).collect();
        'epochs: for _ in 0..fed.epochs {
            stream.shuffle(&mut order);
            for chunk in minibatches(&order, trainer.batch_size) {
                let eval = surrogate_objective(
                    steps,
                    chunk,
                    &policy,
                    &prev_probs,
                    &global_probs,
                    &advantages,
                    controller.c1,
                    controller.c2,
                    prox_opt,
                );
                if !eval.objective.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
                    aborted = true;
                    break 'epochs;
                }
                for (t, g) in policy.theta.iter_mut().zip(&eval.gradient) {
                    *t += trainer.learning_rate * g;
                }
            }
        }

        if aborted {
            policy = policy_backup;
            *critic = critic_backup;
            stats.push(IterationStats {
                iteration,
                mean_local_kl: 0.0,
                mean_global_sqrtkl: 0.0,
                c1: controller.c1,
                c2: controller.c2,
                surrogate: 0.0,
                mean_advantage,
                value_loss,
                aborted: true,
            });
            continue;
        }

        let measured_local = mean_local_kl(steps, &policy, &prev_probs);
        let measured_global = mean_global_sqrt_kl(steps, &policy, &global_probs);
        controller = controller.adapt(measured_local, measured_global);

        let all: Vec<usize> = (0..steps.len()).collect();
        let full = surrogate_objective(
            steps,
            &all,
            &policy,
            &prev_probs,
            &global_probs,
            &advantages,
            controller.c1,
            controller.c2,
            prox_opt,
        );

        stats.push(IterationStats {
            iteration,
            mean_local_kl: measured_local,
            mean_global_sqrtkl: measured_global,
            c1: controller.c1,
            c2: controller.c2,
            surrogate: if full.objective.is_finite() { full.objective } else { 0.0 },
            mean_advantage,
            value_loss,
            aborted: false,
        });
    }

    Ok(LocalRoundOutcome { policy, controller, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::testkit::two_state_chain;
    use crate::trainer::net::{Architecture, ValueArch};
    use crate::trainer::ParamKind;

    fn fed_config(algorithm: Algorithm) -> FedConfig {
        FedConfig {
            n_agents: 1,
            participants_per_round: 1,
            local_iters: 4,
            timesteps: 64,
            epochs: 2,
            weights: None,
            sample_counts: None,
            rounds: 1,
            master_seed: 5,
            algorithm,
            d_local: 0.003,
            d_global: 0.5,
            c1_init: 1.0,
            c2_init: 1.0,
            fedprox_mu: 0.02,
            record_heterogeneity: false,
        }
    }

    fn trainer_config(lr: f64) -> TrainerConfig {
        TrainerConfig {
            parameterization: ParamKind::TabularSoftmax,
            hidden_width: 4,
            learning_rate: lr,
            value_learning_rate: Some(0.1),
            batch_size: 16,
            lambda: 0.95,
            eval_episodes: 4,
            max_episode_len: 100,
            value_epochs: 5,
            init_scale: 0.05,
        }
    }

    #[test]
    fn zero_iterations_leave_parameters_unchanged() {
        let mdp = two_state_chain(0.9);
        let mut fed = fed_config(Algorithm::Fedkl);
        fed.local_iters = 0;
        let trainer = trainer_config(0.1);
        let global =
            SoftmaxPolicy::zeros(Architecture::TabularSoftmax { n_states: 2, n_actions: 2 });
        let mut critic = ValueEstimator::zeros(ValueArch::Table { n_states: 2 });
        let controller = PenaltyController::new(1.0, 1.0, fed.d_local, fed.d_global);
        let mut stream = RngStream::from_seed(1);
        let out = local_round(&mdp, &fed, &trainer, &global, &mut critic, controller, &mut stream)
            .unwrap();
        assert_eq!(out.policy.theta, global.theta);
        assert!(out.stats.is_empty());
    }

    #[test]
    fn zero_learning_rate_halves_both_coefficients() {
        let mdp = two_state_chain(0.9);
        let fed = fed_config(Algorithm::Fedkl);
        let mut trainer = trainer_config(0.0);
        trainer.value_learning_rate = Some(0.0);
        let global =
            SoftmaxPolicy::zeros(Architecture::TabularSoftmax { n_states: 2, n_actions: 2 });
        let mut critic = ValueEstimator::zeros(ValueArch::Table { n_states: 2 });
        let controller = PenaltyController::new(1.0, 1.0, fed.d_local, fed.d_global);
        let mut stream = RngStream::from_seed(2);
        let out = local_round(&mdp, &fed, &trainer, &global, &mut critic, controller, &mut stream)
            .unwrap();
        assert_eq!(out.policy.theta, global.theta);
        for (i, stat) in out.stats.iter().enumerate() {
            assert_eq!(stat.mean_local_kl, 0.0);
            assert_eq!(stat.mean_global_sqrtkl, 0.0);
            let halved = 1.0 / 2.0f64.powi(i as i32 + 1);
            assert_eq!(stat.c1, halved);
            assert_eq!(stat.c2, halved);
        }
    }

    #[test]
    fn fedavg_keeps_c1_at_zero() {
        let mdp = two_state_chain(0.9);
        let fed = fed_config(Algorithm::Fedavg);
        let trainer = trainer_config(0.2);
        let global =
            SoftmaxPolicy::zeros(Architecture::TabularSoftmax { n_states: 2, n_actions: 2 });
        let mut critic = ValueEstimator::zeros(ValueArch::Table { n_states: 2 });
        let controller = PenaltyController::new(0.0, fed.c2_init, fed.d_local, fed.d_global);
        let mut stream = RngStream::from_seed(3);
        let out = local_round(&mdp, &fed, &trainer, &global, &mut critic, controller, &mut stream)
            .unwrap();
        assert!(out.stats.iter().all(|s| s.c1 == 0.0));
    }
}
