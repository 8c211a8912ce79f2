//! Heterogeneity level, the G diagnostic, and the penalty coefficients.
//!
//! For agent n under a shared policy, the deviation matrix is
//!
//! ```text
//! B_n[s][a] = sum_k q_k (rho_k(s) / rho_n(s)) A_k(s,a) - A_n(s,a)
//! ```
//!
//! and the heterogeneity level is its Frobenius norm. `g_scaled` is the
//! visitation-rescaled diagnostic `||D_n A_n||_F - ||D_n B_n||_F`, computed
//! without ever forming the inverse of D. Expectations over the visitation
//! measure are unnormalized sums throughout (total mass 1/(1-gamma)), which
//! is the form the penalties are derived in.

use crate::error::{Error, Result};
use crate::mdp::{tv_distance, FiniteMdp, TabularPolicy, ValueTables, VisitationTable};

/// Visitation mass below this is treated as unreachable; the rescaling by
/// 1/rho_n is undefined there.
pub const REACHABILITY_TOL: f64 = 1e-12;

/// Exact per-agent solves for a whole family under one shared policy.
pub struct FamilyEval {
    pub values: Vec<ValueTables>,
    pub visitation: Vec<VisitationTable>,
}

impl FamilyEval {
    pub fn compute(family: &[FiniteMdp], policy: &TabularPolicy) -> Result<Self> {
        check_family(family)?;
        let mut values = Vec::with_capacity(family.len());
        let mut visitation = Vec::with_capacity(family.len());
        for mdp in family {
            values.push(mdp.policy_evaluation(policy)?);
            visitation.push(mdp.visitation_frequency(policy)?);
        }
        Ok(Self { values, visitation })
    }
}

#[derive(Debug, Clone)]
pub struct AgentHeterogeneity {
    pub agent: usize,
    /// ||B_n||_F
    pub b_norm: f64,
    /// ||A_n||_F
    pub a_norm: f64,
    /// ||D_n A_n||_F - ||D_n B_n||_F
    pub g_scaled: f64,
    /// 2 ||B_n||_F
    pub alpha: f64,
    /// 2 sum_k q_k 4 eps_k gamma / (1-gamma)^2 * D_TV(rho_k || rho_n)
    pub delta: f64,
    /// max_{s,a} |A_n(s,a)|
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct HeterogeneityReport {
    pub agents: Vec<AgentHeterogeneity>,
    /// sum_k q_k 4 eps_k gamma / (1-gamma)^2, shared by all agents.
    pub beta: f64,
    pub weights: Vec<f64>,
}

fn check_family(family: &[FiniteMdp]) -> Result<()> {
    if family.is_empty() {
        return Err(Error::Config("family must contain at least one agent".into()));
    }
    for (i, mdp) in family.iter().enumerate() {
        if !family[0].same_shape(mdp) {
            return Err(Error::Shape(format!(
                "agent {i} does not share the family's (states, actions, gamma)"
            )));
        }
    }
    Ok(())
}

pub fn check_weights(weights: &[f64], n_agents: usize) -> Result<()> {
    if weights.len() != n_agents {
        return Err(Error::Shape(format!("{} weights for {} agents", weights.len(), n_agents)));
    }
    if weights.iter().any(|&q| q < 0.0) {
        return Err(Error::Config("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn reachability_check(eval: &FamilyEval, agent: usize) -> Result<()> {
    for (s, &rho) in eval.visitation[agent].rho.iter().enumerate() {
        if rho <= REACHABILITY_TOL {
            return Err(Error::UnreachableState { agent, state: s, rho });
        }
    }
    Ok(())
}

fn frobenius_sum_of_squares(m: &[Vec<f64>]) -> f64 {
    m.iter().flat_map(|row| row.iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius norm via the trace form `Tr(M M^T)`, kept as an independent
/// evaluation route.
pub fn frobenius_trace(m: &[Vec<f64>]) -> f64 {
    let mut trace = 0.0;
    for row in m {
        let mut diag = 0.0;
        for &x in row {
            diag += x * x;
        }
        trace += diag;
    }
    trace.sqrt()
}

/// The deviation matrix B_n for one agent. Fails loudly when any state has
/// (numerically) zero visitation mass for agent n.
pub fn heterogeneity_matrix(
    family: &[FiniteMdp],
    weights: &[f64],
    policy: &TabularPolicy,
    agent: usize,
) -> Result<Vec<Vec<f64>>> {
    check_family(family)?;
    check_weights(weights, family.len())?;
    let eval = FamilyEval::compute(family, policy)?;
    heterogeneity_matrix_from(&eval, weights, agent)
}

pub fn heterogeneity_matrix_from(
    eval: &FamilyEval,
    weights: &[f64],
    agent: usize,
) -> Result<Vec<Vec<f64>>> {
    reachability_check(eval, agent)?;
    let n_states = eval.visitation[agent].rho.len();
    let n_actions = eval.values[agent].adv[0].len();
    let mut b = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        let rho_n = eval.visitation[agent].rho[s];
        for a in 0..n_actions {
            let mut mixed = 0.0;
            for (k, &q) in weights.iter().enumerate() {
                mixed += q * eval.visitation[k].rho[s] * eval.values[k].adv[s][a];
            }
            b[s][a] = mixed / rho_n - eval.values[agent].adv[s][a];
        }
    }
    Ok(b)
}

/// `D_n X` without forming the inverse: rows of X scaled by rho_n.
fn row_scaled(rho: &[f64], m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().enumerate().map(|(s, row)| row.iter().map(|&x| rho[s] * x).collect()).collect()
}

pub fn heterogeneity_report(
    family: &[FiniteMdp],
    weights: &[f64],
    policy: &TabularPolicy,
) -> Result<HeterogeneityReport> {
    check_family(family)?;
    check_weights(weights, family.len())?;
    let eval = FamilyEval::compute(family, policy)?;
    heterogeneity_report_from(family, &eval, weights)
}

pub fn heterogeneity_report_from(
    family: &[FiniteMdp],
    eval: &FamilyEval,
    weights: &[f64],
) -> Result<HeterogeneityReport> {
    let gamma = family[0].gamma();
    let n_agents = family.len();
    let trust_scale = 4.0 * gamma / ((1.0 - gamma) * (1.0 - gamma));

    let epsilons: Vec<f64> = eval
        .values
        .iter()
        .map(|v| v.adv.iter().flat_map(|row| row.iter()).map(|a| a.abs()).fold(0.0, f64::max))
        .collect();
    let beta: f64 = weights.iter().zip(&epsilons).map(|(&q, &e)| q * trust_scale * e).sum();

    let mut agents = Vec::with_capacity(n_agents);
    for n in 0..n_agents {
        let b = heterogeneity_matrix_from(eval, weights, n)?;
        let b_norm = frobenius_sum_of_squares(&b);
        let a_norm = frobenius_sum_of_squares(&eval.values[n].adv);
        let rho_n = &eval.visitation[n].rho;
        // D-rescaled forms never divide by rho_n:
        // (D_n B_n)[s][a] = sum_k q_k rho_k(s) A_k(s,a) - rho_n(s) A_n(s,a)
        let n_states = rho_n.len();
        let n_actions = eval.values[n].adv[0].len();
        let mut db = vec![vec![0.0; n_actions]; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let mut mixed = 0.0;
                for (k, &q) in weights.iter().enumerate() {
                    mixed += q * eval.visitation[k].rho[s] * eval.values[k].adv[s][a];
                }
                db[s][a] = mixed - rho_n[s] * eval.values[n].adv[s][a];
            }
        }
        let da = row_scaled(rho_n, &eval.values[n].adv);
        let g_scaled = frobenius_sum_of_squares(&da) - frobenius_sum_of_squares(&db);

        let delta: f64 = weights
            .iter()
            .zip(&epsilons)
            .enumerate()
            .map(|(k, (&q, &e))| {
                let tv_rho = 0.5
                    * eval.visitation[k]
                        .rho
                        .iter()
                        .zip(rho_n)
                        .map(|(a, b)| (a - b).abs())
                        .sum::<f64>();
                2.0 * q * trust_scale * e * tv_rho
            })
            .sum();

        agents.push(AgentHeterogeneity {
            agent: n,
            b_norm,
            a_norm,
            g_scaled,
            alpha: 2.0 * b_norm,
            delta,
            epsilon: epsilons[n],
        });
    }
    Ok(HeterogeneityReport { agents, beta, weights: weights.to_vec() })
}

impl HeterogeneityReport {
    /// One CSV row per agent: round,agent,b_norm,a_norm,g_scaled,alpha,beta,delta
    pub fn csv_rows(&self, round: usize) -> Vec<String> {
        self.agents
            .iter()
            .map(|a| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    round, a.agent, a.b_norm, a.a_norm, a.g_scaled, a.alpha, self.beta, a.delta
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "beta": self.beta,
            "weights": self.weights,
            "agents": self.agents.iter().map(|a| serde_json::json!({
                "agent": a.agent,
                "b_norm": a.b_norm,
                "a_norm": a.a_norm,
                "g_scaled": a.g_scaled,
                "alpha": a.alpha,
                "delta": a.delta,
                "epsilon": a.epsilon,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Uniform federation weights.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Penalized local policy advantage of a candidate policy:
/// `A_n(cand) - alpha * sum_s rho_n(s) D_TV(pi(.|s) || cand(.|s))`.
pub fn penalized_local_advantage(
    eval: &FamilyEval,
    agent: usize,
    alpha: f64,
    policy: &TabularPolicy,
    cand: &TabularPolicy,
) -> f64 {
    let rho = &eval.visitation[agent];
    let adv = &eval.values[agent].adv;
    let gain = crate::mdp::policy_advantage_from(rho, adv, cand);
    let penalty: f64 =
        (0..policy.n_states()).map(|s| rho.rho[s] * tv_distance(policy.row(s), cand.row(s))).sum();
    gain - alpha * penalty
}
