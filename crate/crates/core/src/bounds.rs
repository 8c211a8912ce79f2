//! Numerical certification of the policy-improvement bounds.
//!
//! Every inequality the exact pipeline relies on is checked here on solvable
//! instances: the KL and TV policy-improvement bounds, the federation bound
//! linking local and global policy advantages, the global-return bound with
//! its three penalty coefficients, Pinsker's inequality, linearity of the
//! policy advantage, and the mixture-TV bound used by the aggregation step.
//! These are proved statements, so a violation beyond float tolerance means
//! an implementation bug, and the test suite treats it as such.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::hetero::{
    check_weights, heterogeneity_matrix_from, heterogeneity_report_from, FamilyEval,
};
use crate::mdp::{
    kl_divergence, kl_max, policy_advantage_from, tv_distance, tv_max, FiniteMdp, TabularPolicy,
};

/// Slack below this is a genuine violation, not float noise.
pub const SLACK_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    /// Set when an infinite KL made the check vacuous.
    pub flagged_infinite: bool,
    pub coefficients: BTreeMap<String, f64>,
}

impl BoundCheck {
    /// Inequality check: holds iff `lhs >= rhs - SLACK_TOL`.
    fn inequality(
        name: &'static str,
        lhs: f64,
        rhs: f64,
        coefficients: BTreeMap<String, f64>,
    ) -> Self {
        let slack = lhs - rhs;
        let flagged_infinite = !lhs.is_finite() || !rhs.is_finite();
        let holds = slack >= -SLACK_TOL || (rhs == f64::NEG_INFINITY);
        BoundCheck { name, lhs, rhs, slack, holds, flagged_infinite, coefficients }
    }

    /// Identity check: `slack = -|lhs - rhs|`, same tolerance convention.
    fn equality(
        name: &'static str,
        lhs: f64,
        rhs: f64,
        coefficients: BTreeMap<String, f64>,
    ) -> Self {
        let slack = -(lhs - rhs).abs();
        BoundCheck {
            name,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL,
            flagged_infinite: !lhs.is_finite() || !rhs.is_finite(),
            coefficients,
        }
    }
}

fn coeffs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Unnormalized visitation-weighted TV distance between two policies:
/// `sum_s rho(s) D_TV(pi(.|s) || pi2(.|s))`.
pub fn visitation_weighted_tv(rho: &[f64], pi: &TabularPolicy, pi2: &TabularPolicy) -> f64 {
    (0..pi.n_states()).map(|s| rho[s] * tv_distance(pi.row(s), pi2.row(s))).sum()
}

/// KL-penalized improvement bound:
/// `eta(pi2) - eta(pi) >= A_pi(pi2) - c * max_s KL(pi || pi2)`
/// with `c = 4 max|A| gamma / (1-gamma)^2`.
pub fn check_trpo_bound(
    mdp: &FiniteMdp,
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
) -> Result<BoundCheck> {
    let values = mdp.policy_evaluation(pi)?;
    let rho = mdp.visitation_frequency(pi)?;
    let eta = mdp.expected_return(pi)?;
    let eta2 = mdp.expected_return(pi2)?;
    let gain = policy_advantage_from(&rho, &values.adv, pi2);
    let eps = values.adv.iter().flatten().map(|a| a.abs()).fold(0.0, f64::max);
    let gamma = mdp.gamma();
    let c = 4.0 * eps * gamma / ((1.0 - gamma) * (1.0 - gamma));
    let d_kl_max = kl_max(pi, pi2);
    Ok(BoundCheck::inequality(
        "trpo_kl",
        eta2 - eta,
        gain - c * d_kl_max,
        coeffs(&[("c", c), ("epsilon", eps), ("d_kl_max", d_kl_max)]),
    ))
}

/// TV-penalized improvement bound:
/// `eta(pi2) - eta(pi) >= A_pi(pi2) - c_cpo * sum_s rho(s) D_TV(pi || pi2)`
/// with `c_cpo = 2 max_s |E_{a~pi2} A_pi(s,a)| gamma / (1-gamma)^2 <= c`.
pub fn check_cpo_bound(
    mdp: &FiniteMdp,
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
) -> Result<BoundCheck> {
    let values = mdp.policy_evaluation(pi)?;
    let rho = mdp.visitation_frequency(pi)?;
    let eta = mdp.expected_return(pi)?;
    let eta2 = mdp.expected_return(pi2)?;
    let gain = policy_advantage_from(&rho, &values.adv, pi2);
    let gamma = mdp.gamma();
    let eps_cand = (0..pi.n_states())
        .map(|s| (0..pi.n_actions()).map(|a| pi2.prob(s, a) * values.adv[s][a]).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let c_cpo = 2.0 * eps_cand * gamma / ((1.0 - gamma) * (1.0 - gamma));
    let weighted_tv = visitation_weighted_tv(&rho.rho, pi, pi2);
    Ok(BoundCheck::inequality(
        "cpo_tv",
        eta2 - eta,
        gain - c_cpo * weighted_tv,
        coeffs(&[("c_cpo", c_cpo), ("weighted_tv", weighted_tv)]),
    ))
}

/// Federation bound for agent n:
/// `sum_k q_k A_k(pi2) >= A_n(pi2) - 2 ||B_n||_F sum_s rho_n(s) D_TV(pi||pi2)`.
///
/// `negate_penalty` flips the penalty sign; that makes the statement false
/// and exists purely so the checker can be self-tested against a known bug.
pub fn check_federation_advantage_bound(
    family: &[FiniteMdp],
    weights: &[f64],
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
    agent: usize,
    negate_penalty: bool,
) -> Result<BoundCheck> {
    check_weights(weights, family.len())?;
    let eval = FamilyEval::compute(family, pi)?;
    let b = heterogeneity_matrix_from(&eval, weights, agent)?;
    let b_norm = b.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let alpha = 2.0 * b_norm;
    let lhs: f64 = weights
        .iter()
        .enumerate()
        .map(|(k, &q)| q * policy_advantage_from(&eval.visitation[k], &eval.values[k].adv, pi2))
        .sum();
    let local = policy_advantage_from(&eval.visitation[agent], &eval.values[agent].adv, pi2);
    let weighted_tv = visitation_weighted_tv(&eval.visitation[agent].rho, pi, pi2);
    let sign = if negate_penalty { -1.0 } else { 1.0 };
    let rhs = local - sign * alpha * weighted_tv;
    Ok(BoundCheck::inequality(
        "federation_advantage",
        lhs,
        rhs,
        coeffs(&[("alpha", alpha), ("b_norm", b_norm), ("weighted_tv", weighted_tv)]),
    ))
}

/// The penalized global-return surrogate for agent n evaluated at `pi2`,
/// with every coefficient frozen at the reference policy `pi`:
/// `g(pi2) = sum_k q_k eta_k(pi) + A_n(pi2)
///           - (alpha + beta) sum_s rho_n(s) D_TV(pi||pi2)
///           - delta max_s D_TV(pi||pi2)`.
pub fn global_return_surrogate(
    family: &[FiniteMdp],
    weights: &[f64],
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
    agent: usize,
) -> Result<(f64, BTreeMap<String, f64>)> {
    let eval = FamilyEval::compute(family, pi)?;
    let report = heterogeneity_report_from(family, &eval, weights)?;
    let eta_ref: f64 = weights
        .iter()
        .enumerate()
        .map(|(k, &q)| {
            q * family[k].mu().iter().zip(&eval.values[k].v).map(|(m, v)| m * v).sum::<f64>()
        })
        .sum();
    let local = policy_advantage_from(&eval.visitation[agent], &eval.values[agent].adv, pi2);
    let weighted_tv = visitation_weighted_tv(&eval.visitation[agent].rho, pi, pi2);
    let alpha = report.agents[agent].alpha;
    let delta = report.agents[agent].delta;
    let beta = report.beta;
    let g = eta_ref + local - (alpha + beta) * weighted_tv - delta * tv_max(pi, pi2);
    Ok((
        g,
        coeffs(&[
            ("alpha", alpha),
            ("beta", beta),
            ("delta", delta),
            ("epsilon_n", report.agents[agent].epsilon),
        ]),
    ))
}

/// Global-return bound: `eta(pi2) = sum_k q_k eta_k(pi2) >= g(pi2)`.
pub fn check_global_return_bound(
    family: &[FiniteMdp],
    weights: &[f64],
    pi: &TabularPolicy,
    pi2: &TabularPolicy,
    agent: usize,
) -> Result<BoundCheck> {
    check_weights(weights, family.len())?;
    let mut lhs = 0.0;
    for (k, &q) in weights.iter().enumerate() {
        lhs += q * family[k].expected_return(pi2)?;
    }
    let (g, coefficients) = global_return_surrogate(family, weights, pi, pi2, agent)?;
    Ok(BoundCheck::inequality("global_return", lhs, g, coefficients))
}

/// Surrogate touches the objective at the reference policy: `g(pi) = eta(pi)`.
pub fn check_minorization_equality(
    family: &[FiniteMdp],
    weights: &[f64],
    pi: &TabularPolicy,
    agent: usize,
) -> Result<BoundCheck> {
    let mut eta = 0.0;
    for (k, &q) in weights.iter().enumerate() {
        eta += q * family[k].expected_return(pi)?;
    }
    let (g, coefficients) = global_return_surrogate(family, weights, pi, pi, agent)?;
    Ok(BoundCheck::equality("minorization_equality", eta, g, coefficients))
}

/// Pinsker: `sqrt(KL(p||q) / 2) >= D_TV(p||q)`. Infinite KL (support
/// mismatch) holds vacuously and is flagged.
pub fn check_pinsker(p: &[f64], q: &[f64]) -> BoundCheck {
    let kl = kl_divergence(p, q);
    let tv = tv_distance(p, q);
    let lhs = (0.5 * kl).sqrt();
    BoundCheck::inequality("pinsker", lhs, tv, coeffs(&[("kl", kl), ("tv", tv)]))
}

/// Per-state TV against a mixture is at most the mixture of TVs; the check
/// reports the tightest state.
pub fn check_mixture_tv(
    policies: &[TabularPolicy],
    weights: &[f64],
    reference: &TabularPolicy,
) -> Result<BoundCheck> {
    check_weights(weights, policies.len())?;
    let n_states = reference.n_states();
    let n_actions = reference.n_actions();
    let mut worst: Option<(f64, f64, f64)> = None; // (slack, lhs, rhs)
    for s in 0..n_states {
        let mut mix = vec![0.0; n_actions];
        for (k, pi) in policies.iter().enumerate() {
            for (a, m) in mix.iter_mut().enumerate() {
                *m += weights[k] * pi.prob(s, a);
            }
        }
        let rhs = tv_distance(reference.row(s), &mix);
        let lhs: f64 = policies
            .iter()
            .zip(weights)
            .map(|(pi, &q)| q * tv_distance(reference.row(s), pi.row(s)))
            .sum();
        let slack = lhs - rhs;
        if worst.map_or(true, |(w, _, _)| slack < w) {
            worst = Some((slack, lhs, rhs));
        }
    }
    let (_, lhs, rhs) = worst.expect("policies have at least one state");
    Ok(BoundCheck::inequality("mixture_tv", lhs, rhs, BTreeMap::new()))
}

/// Policy advantage is linear over policy mixtures.
pub fn check_advantage_linearity(
    mdp: &FiniteMdp,
    base: &TabularPolicy,
    pi_hat: &TabularPolicy,
    pi_prime: &TabularPolicy,
    w: f64,
) -> Result<BoundCheck> {
    let mixed = pi_hat.mix(pi_prime, w)?;
    let lhs = mdp.policy_advantage(base, &mixed)?;
    let rhs = w * mdp.policy_advantage(base, pi_hat)?
        + (1.0 - w) * mdp.policy_advantage(base, pi_prime)?;
    Ok(BoundCheck::equality("advantage_linearity", lhs, rhs, coeffs(&[("w", w)])))
}

/// Exact federated policy iteration must improve monotonically; the check
/// reports the worst consecutive round of a return series.
pub fn check_monotone_history(eta_series: &[f64]) -> BoundCheck {
    if eta_series.len() < 2 {
        return BoundCheck::inequality("monotone_history", 0.0, 0.0, BTreeMap::new());
    }
    let mut worst_round = 0usize;
    let mut worst = f64::INFINITY;
    for t in 0..eta_series.len() - 1 {
        let diff = eta_series[t + 1] - eta_series[t];
        if diff < worst {
            worst = diff;
            worst_round = t;
        }
    }
    BoundCheck::inequality(
        "monotone_history",
        eta_series[worst_round + 1],
        eta_series[worst_round],
        coeffs(&[("worst_round", worst_round as f64)]),
    )
}
