//! Exact tabular federated policy iteration.
//!
//! Each round: solve every agent exactly under the broadcast policy, compute
//! the penalty coefficients in closed form, let every agent maximize its
//! penalized local objective
//!
//! ```text
//! h_n(pi) = A_n(pi) - (alpha_n + beta) sum_s rho_n(s) D_TV(pi_t(.|s)||pi(.|s))
//!           - delta_n max_s D_TV(pi_t(.|s)||pi(.|s))
//! ```
//!
//! over the product of per-state simplices, then aggregate in probability
//! space. The optimizer only ever accepts candidates with h >= 0 (the
//! broadcast policy itself scores h = 0), which is exactly what the
//! monotone-improvement argument needs, so the recorded global return can
//! never decrease.

use crate::error::Result;
use crate::fed::{
    aggregate_policies, AgentRoundRecord, Algorithm, FedConfig, FedHistory, RoundRecord,
};
use crate::hetero::{heterogeneity_report_from, FamilyEval};
use crate::mdp::{tv_distance, FiniteMdp, TabularPolicy};
use crate::util::parallel_map;

/// Exact penalty coefficients for one agent under the broadcast policy.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

const PGD_STEPS: usize = 200;
const PGD_RESTARTS: usize = 3;
const TIE_TOL: f64 = 1e-12;

struct LocalObjective<'a> {
    rho: &'a [f64],
    adv: &'a [Vec<f64>],
    coeffs: PenaltyCoefficients,
    reference: &'a TabularPolicy,
}

impl LocalObjective<'_> {
    fn value(&self, rows: &[Vec<f64>]) -> f64 {
        let mut gain = 0.0;
        let mut weighted_tv = 0.0;
        let mut max_tv: f64 = 0.0;
        for (s, row) in rows.iter().enumerate() {
            let mut per_state = 0.0;
            for (a, &p) in row.iter().enumerate() {
                per_state += p * self.adv[s][a];
            }
            gain += self.rho[s] * per_state;
            let tv = tv_distance(self.reference.row(s), row);
            weighted_tv += self.rho[s] * tv;
            max_tv = max_tv.max(tv);
        }
        gain - (self.coeffs.alpha + self.coeffs.beta) * weighted_tv - self.coeffs.delta * max_tv
    }

    /// Ascent subgradient. The max-TV term averages its subgradient over all
    /// maximizing states (standard nonsmooth treatment, deterministic).
    fn subgradient(&self, rows: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let n_states = rows.len();
        let tvs: Vec<f64> =
            (0..n_states).map(|s| tv_distance(self.reference.row(s), &rows[s])).collect();
        let max_tv = tvs.iter().copied().fold(0.0, f64::max);
        let ties: Vec<usize> = (0..n_states).filter(|&s| tvs[s] >= max_tv - TIE_TOL).collect();
        let tie_weight = if max_tv > TIE_TOL { 1.0 / ties.len() as f64 } else { 0.0 };

        for (s, row) in rows.iter().enumerate() {
            let in_ties = tie_weight > 0.0 && ties.contains(&s);
            for (a, &p) in row.iter().enumerate() {
                let sign = (p - self.reference.prob(s, a)).signum();
                let sign =
                    if (p - self.reference.prob(s, a)).abs() <= TIE_TOL { 0.0 } else { sign };
                let mut g = self.rho[s] * self.adv[s][a]
                    - (self.coeffs.alpha + self.coeffs.beta) * self.rho[s] * 0.5 * sign;
                if in_ties {
                    g -= self.coeffs.delta * tie_weight * 0.5 * sign;
                }
                out[s][a] = g;
            }
        }
    }
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let candidate = (cum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn greedy_rows(adv: &[Vec<f64>]) -> Vec<Vec<f64>> {
    adv.iter()
        .map(|row| {
            let mut best = 0;
            for (a, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = a;
                }
            }
            let mut out = vec![0.0; row.len()];
            out[best] = 1.0;
            out
        })
        .collect()
}

/// Maximizes the penalized local objective with projected gradient ascent
/// (fixed budget, deterministic restarts) and returns the best candidate
/// together with its exact h value. Falls back to the broadcast policy
/// (h = 0) when no improvement is found.
pub fn optimize_local_objective_from(
    rho: &[f64],
    adv: &[Vec<f64>],
    coeffs: &PenaltyCoefficients,
    pi_global: &TabularPolicy,
) -> (TabularPolicy, f64) {
    let objective = LocalObjective { rho, adv, coeffs: *coeffs, reference: pi_global };
    let n_states = pi_global.n_states();
    let n_actions = pi_global.n_actions();

    let reference_rows: Vec<Vec<f64>> = pi_global.rows().to_vec();
    let greedy = greedy_rows(adv);
    let mixed: Vec<Vec<f64>> = reference_rows
        .iter()
        .zip(&greedy)
        .map(|(r, g)| r.iter().zip(g).map(|(a, b)| 0.5 * a + 0.5 * b).collect())
        .collect();
    let starts = [reference_rows, greedy, mixed];

    let mut best_rows: Option<Vec<Vec<f64>>> = None;
    let mut best_h = 0.0;
    let mut grad = vec![vec![0.0; n_actions]; n_states];
    for start in starts.iter().take(PGD_RESTARTS) {
        let mut rows = start.clone();
        let h0 = objective.value(&rows);
        if h0 > best_h {
            best_h = h0;
            best_rows = Some(rows.clone());
        }
        objective.subgradient(&rows, &mut grad);
        let g_max = grad.iter().flatten().map(|g| g.abs()).fold(0.0, f64::max);
        let base_step = 0.25 / (g_max + 1e-12);
        for k in 0..PGD_STEPS {
            objective.subgradient(&rows, &mut grad);
            let step = base_step / ((k + 1) as f64).sqrt();
            for (row, grow) in rows.iter_mut().zip(&grad) {
                for (x, g) in row.iter_mut().zip(grow) {
                    *x += step * g;
                }
                project_to_simplex(row);
            }
            let h = objective.value(&rows);
            if h > best_h {
                best_h = h;
                best_rows = Some(rows.clone());
            }
        }
    }

    match best_rows {
        Some(rows) if best_h > 0.0 => {
            let policy = TabularPolicy::new(rows).expect("projection keeps rows stochastic");
            (policy, best_h)
        }
        _ => (pi_global.clone(), 0.0),
    }
}

/// Convenience entry that solves the agent exactly first.
pub fn optimize_local_objective(
    mdp: &FiniteMdp,
    coeffs: &PenaltyCoefficients,
    pi_global: &TabularPolicy,
) -> Result<(TabularPolicy, f64)> {
    let values = mdp.policy_evaluation(pi_global)?;
    let rho = mdp.visitation_frequency(pi_global)?;
    Ok(optimize_local_objective_from(&rho.rho, &values.adv, coeffs, pi_global))
}

/// Full-participation exact federated policy iteration.
pub fn run_federated_policy_iteration(
    config: &FedConfig,
    family: &[FiniteMdp],
    workers: usize,
) -> Result<FedHistory> {
    config.validate()?;
    if config.algorithm != Algorithm::ExactTabular {
        return Err(crate::error::Error::Config(
            "run_federated_policy_iteration requires the exact-tabular algorithm tag".into(),
        ));
    }
    if config.n_agents != family.len() {
        return Err(crate::error::Error::Config(format!(
            "config declares {} agents but the family has {}",
            config.n_agents,
            family.len()
        )));
    }
    if config.participants_per_round != config.n_agents {
        return Err(crate::error::Error::Config(
            "the exact loop runs with full participation (K = N)".into(),
        ));
    }
    let weights = config.effective_weights();
    let n_states = family[0].n_states();
    let n_actions = family[0].n_actions();
    let mut pi = TabularPolicy::uniform(n_states, n_actions);
    let mut rounds = Vec::with_capacity(config.rounds + 1);

    for t in 0..config.rounds {
        let eval = FamilyEval::compute(family, &pi)?;
        let report = heterogeneity_report_from(family, &eval, &weights)?;
        let eta_locals: Vec<f64> = (0..family.len())
            .map(|k| family[k].mu().iter().zip(&eval.values[k].v).map(|(m, v)| m * v).sum())
            .collect();
        let eta_global: f64 = weights.iter().zip(&eta_locals).map(|(q, e)| q * e).sum();

        let locals: Vec<(TabularPolicy, f64)> = parallel_map(family.len(), workers, |n| {
            let coeffs = PenaltyCoefficients {
                alpha: report.agents[n].alpha,
                beta: report.beta,
                delta: report.agents[n].delta,
            };
            optimize_local_objective_from(
                &eval.visitation[n].rho,
                &eval.values[n].adv,
                &coeffs,
                &pi,
            )
        });

        let agents = (0..family.len())
            .map(|n| AgentRoundRecord {
                agent: n,
                eta_local: eta_locals[n],
                h_value: Some(locals[n].1),
                b_norm: Some(report.agents[n].b_norm),
                g_scaled: Some(report.agents[n].g_scaled),
                final_c1: None,
                final_c2: None,
                iterations: Vec::new(),
            })
            .collect();
        rounds.push(RoundRecord { round: t, eta_global, eta_mc: None, agents });

        let policies: Vec<TabularPolicy> = locals.into_iter().map(|(p, _)| p).collect();
        pi = aggregate_policies(&policies, &weights)?;
    }

    let eval = FamilyEval::compute(family, &pi)?;
    let eta_global: f64 = weights
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            q * family[k].mu().iter().zip(&eval.values[k].v).map(|(m, v)| m * v).sum::<f64>()
        })
        .sum();
    rounds.push(RoundRecord { round: config.rounds, eta_global, eta_mc: None, agents: Vec::new() });

    Ok(FedHistory {
        algorithm: config.algorithm.tag(),
        rounds,
        final_policy: crate::fed::FinalPolicy::Table { policy_table: pi.rows().to_vec() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::check_monotone_history;
    use crate::env::{make_garnet_family, GarnetSpec};
    use crate::mdp::testkit::two_state_chain;

    fn exact_config(n_agents: usize, rounds: usize) -> FedConfig {
        FedConfig {
            n_agents,
            participants_per_round: n_agents,
            local_iters: 1,
            timesteps: 1,
            epochs: 1,
            weights: None,
            sample_counts: None,
            rounds,
            master_seed: 7,
            algorithm: Algorithm::ExactTabular,
            d_local: 0.003,
            d_global: 0.5,
            c1_init: 1.0,
            c2_init: 1.0,
            fedprox_mu: 0.02,
            record_heterogeneity: true,
        }
    }

    #[test]
    fn huge_alpha_returns_reference_policy() {
        let mdp = two_state_chain(0.5);
        let pi = TabularPolicy::uniform(2, 2);
        let coeffs = PenaltyCoefficients { alpha: 1e6, beta: 0.0, delta: 0.0 };
        let (out, h) = optimize_local_objective(&mdp, &coeffs, &pi).unwrap();
        assert_eq!(out, pi);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn zero_reward_returns_reference_policy() {
        let mdp = FiniteMdp::new(
            2,
            2,
            0.5,
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
        )
        .unwrap();
        let pi = TabularPolicy::uniform(2, 2);
        let coeffs = PenaltyCoefficients { alpha: 0.0, beta: 0.1, delta: 0.0 };
        let (out, h) = optimize_local_objective(&mdp, &coeffs, &pi).unwrap();
        assert_eq!(out, pi);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn low_discount_chain_improves_strictly() {
        // gamma = 0.2 keeps the exact penalty coefficients below the advantage
        // spread, so a strict improvement exists: moving all uniform mass to
        // the argmax action gains (0.2 - beta) per unit of visitation with
        // beta = 4 * 0.1 * 0.2 / 0.64 = 0.125, giving
        // h* = 0.075 * 0.5 * (1 / 0.8) = 0.046875 exactly.
        let mdp = two_state_chain(0.2);
        let pi = TabularPolicy::uniform(2, 2);
        let values = mdp.policy_evaluation(&pi).unwrap();
        let eps = values.adv.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
        let beta = 4.0 * eps * 0.2 / (0.8 * 0.8);
        let coeffs = PenaltyCoefficients { alpha: 0.0, beta, delta: 0.0 };
        let (out, h) = optimize_local_objective(&mdp, &coeffs, &pi).unwrap();
        assert!((h - 0.046875).abs() < 1e-9, "h = {h}");
        let eta0 = mdp.expected_return(&pi).unwrap();
        let eta1 = mdp.expected_return(&out).unwrap();
        assert!(eta1 > eta0, "return must improve: {eta0} -> {eta1}");
    }

    #[test]
    fn high_discount_chain_is_frozen_by_exact_penalties() {
        // at gamma = 0.5 the beta penalty (2.0) exceeds the advantage spread
        // (0.5), so no candidate has h > 0 and the reference is returned
        let mdp = two_state_chain(0.5);
        let pi = TabularPolicy::uniform(2, 2);
        let values = mdp.policy_evaluation(&pi).unwrap();
        let eps = values.adv.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
        let beta = 4.0 * eps * 0.5 / 0.25;
        let coeffs = PenaltyCoefficients { alpha: 0.0, beta, delta: 0.0 };
        let (out, h) = optimize_local_objective(&mdp, &coeffs, &pi).unwrap();
        assert_eq!(out, pi);
        assert_eq!(h, 0.0);
    }

    #[test]
    fn zero_rounds_history_is_initial_evaluation() {
        let family = vec![two_state_chain(0.2)];
        let mut cfg = exact_config(1, 0);
        cfg.rounds = 0;
        let history = run_federated_policy_iteration(&cfg, &family, 1).unwrap();
        assert_eq!(history.rounds.len(), 1);
        assert!(history.rounds[0].agents.is_empty());
    }

    #[test]
    fn iid_family_run_is_monotone() {
        let mdp = two_state_chain(0.2);
        let family = vec![mdp.clone(), mdp.clone(), mdp];
        let history = run_federated_policy_iteration(&exact_config(3, 15), &family, 1).unwrap();
        let check = check_monotone_history(&history.eta_series());
        assert!(check.holds, "monotonicity violated: slack {}", check.slack);
        // strict overall improvement on this low-discount instance
        let etas = history.eta_series();
        assert!(etas[etas.len() - 1] > etas[0] + 1e-3);
    }

    #[test]
    fn heterogeneous_chain_family_converges_monotonically() {
        let base = two_state_chain(0.2);
        let flipped = FiniteMdp::new(
            2,
            2,
            0.2,
            vec![0.0, 1.0],
            base.reward_table().to_vec(),
            vec![
                vec![base.transition_row(0, 0).to_vec(), base.transition_row(0, 1).to_vec()],
                vec![base.transition_row(1, 0).to_vec(), base.transition_row(1, 1).to_vec()],
            ],
        )
        .unwrap();
        let family = vec![base, flipped];
        let history = run_federated_policy_iteration(&exact_config(2, 30), &family, 1).unwrap();
        let etas = history.eta_series();
        assert!(check_monotone_history(&etas).holds);
        let tail = etas[etas.len() - 1] - etas[etas.len() - 2];
        assert!(tail.abs() < 1e-6, "tail difference {tail}");
    }

    #[test]
    fn garnet_run_respects_return_upper_bound() {
        let spec = GarnetSpec {
            n_states: 6,
            n_actions: 3,
            branching: 2,
            reward_sparsity: 0.6,
            seed: 5,
            n_agents: 3,
            gamma: 0.15,
            transition_perturbation: 0.3,
            mu_perturbation: 0.3,
        };
        let family = make_garnet_family(&spec).unwrap();
        let history = run_federated_policy_iteration(&exact_config(3, 10), &family, 1).unwrap();
        let r_max = family.iter().map(|m| m.max_reward()).fold(f64::NEG_INFINITY, f64::max);
        let bound = r_max / (1.0 - 0.15);
        for r in &history.rounds {
            assert!(r.eta_global <= bound + 1e-9);
        }
    }

    #[test]
    fn single_agent_matches_direct_optimization_bitwise() {
        let family = vec![two_state_chain(0.2)];
        let cfg = exact_config(1, 5);
        let history = run_federated_policy_iteration(&cfg, &family, 1).unwrap();

        // the same loop executed by hand
        let mdp = &family[0];
        let mut pi = TabularPolicy::uniform(2, 2);
        let mut etas = Vec::new();
        for _ in 0..5 {
            let eval = FamilyEval::compute(&family, &pi).unwrap();
            let report = heterogeneity_report_from(&family, &eval, &[1.0]).unwrap();
            etas.push(mdp.mu().iter().zip(&eval.values[0].v).map(|(m, v)| m * v).sum::<f64>());
            let coeffs = PenaltyCoefficients {
                alpha: report.agents[0].alpha,
                beta: report.beta,
                delta: report.agents[0].delta,
            };
            let (next, _) = optimize_local_objective_from(
                &eval.visitation[0].rho,
                &eval.values[0].adv,
                &coeffs,
                &pi,
            );
            pi = aggregate_policies(&[next], &[1.0]).unwrap();
        }
        for (r, eta) in history.rounds.iter().zip(&etas) {
            assert_eq!(r.eta_global.to_bits(), eta.to_bits());
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mdp = two_state_chain(0.2);
        let family = vec![mdp.clone(), mdp.clone(), mdp];
        let a = run_federated_policy_iteration(&exact_config(3, 8), &family, 1).unwrap();
        let b = run_federated_policy_iteration(&exact_config(3, 8), &family, 3).unwrap();
        for (ra, rb) in a.rounds.iter().zip(&b.rounds) {
            assert_eq!(ra.eta_global.to_bits(), rb.eta_global.to_bits());
        }
    }
}
