//! Exact finite-MDP representation and closed-form solvers.
//!
//! Values, advantages, discounted visitation frequencies, expected returns
//! and policy advantages are all computed by direct linear solves, so every
//! downstream quantity in this crate has an exact oracle. Evaluation order is
//! fixed (state-major, action-minor) to keep repeated runs bit-identical.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::lu_solve;

/// Row/column sums of probability tables must match 1 this tightly.
pub const PROB_TOL: f64 = 1e-12;
/// Linear-solve residual requirement.
pub const SOLVE_TOL: f64 = 1e-9;
/// Above this state count, solvers switch from LU to fixed-point iteration.
const DIRECT_SOLVE_MAX: usize = 512;
const FIXED_POINT_TOL: f64 = 1e-10;

/// One agent's environment: transition tensor `P[s][a][s']`, expected-reward
/// table `R[s][a]`, initial distribution `mu[s]` and discount `gamma`.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    mu: Vec<f64>,
    reward: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

/// Stochastic policy as a row-stochastic table `probs[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

/// Exact V, Q and advantage tables for one (mdp, policy) pair.
#[derive(Debug, Clone)]
pub struct ValueTables {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub adv: Vec<Vec<f64>>,
}

/// Unnormalized discounted state-occupancy vector; total mass 1/(1-gamma).
#[derive(Debug, Clone)]
pub struct VisitationTable {
    pub rho: Vec<f64>,
}

fn check_distribution(xs: &[f64], what: &str) -> Result<()> {
    let mut sum = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::Distribution(format!(
                "{what}: entry {i} is {x}, must be finite and >= 0"
            )));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Distribution(format!(
            "{what}: sums to {sum}, expected 1 within {PROB_TOL:e}"
        )));
    }
    Ok(())
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        mu: Vec<f64>,
        reward: Vec<Vec<f64>>,
        transition: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("state and action counts must be positive".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if mu.len() != n_states {
            return Err(Error::Shape(format!("mu has {} entries, expected {n_states}", mu.len())));
        }
        if reward.len() != n_states || reward.iter().any(|row| row.len() != n_actions) {
            return Err(Error::Shape("reward table must be n_states x n_actions".into()));
        }
        if transition.len() != n_states
            || transition.iter().any(|per_a| {
                per_a.len() != n_actions || per_a.iter().any(|row| row.len() != n_states)
            })
        {
            return Err(Error::Shape(
                "transition tensor must be n_states x n_actions x n_states".into(),
            ));
        }
        check_distribution(&mu, "mu")?;
        for (s, per_a) in transition.iter().enumerate() {
            for (a, row) in per_a.iter().enumerate() {
                check_distribution(row, &format!("P[{s}][{a}]"))?;
            }
        }
        for (s, row) in reward.iter().enumerate() {
            for (a, &r) in row.iter().enumerate() {
                if !r.is_finite() {
                    return Err(Error::Config(format!("R[{s}][{a}] is not finite")));
                }
            }
        }
        Ok(Self { n_states, n_actions, gamma, mu, reward, transition })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s][a]
    }

    pub fn reward_table(&self) -> &[Vec<f64>] {
        &self.reward
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s][a]
    }

    pub fn max_reward(&self) -> f64 {
        self.reward.iter().flat_map(|row| row.iter().copied()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// States that self-loop under every action with zero reward. The exact
    /// solvers treat these as ordinary absorbing states; the trajectory
    /// sampler uses them as episode boundaries.
    pub fn absorbing_states(&self) -> Vec<bool> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions).all(|a| {
                    self.transition[s][a][s] >= 1.0 - PROB_TOL
                        && self.reward[s][a].abs() <= PROB_TOL
                })
            })
            .collect()
    }

    pub fn same_shape(&self, other: &FiniteMdp) -> bool {
        self.n_states == other.n_states
            && self.n_actions == other.n_actions
            && self.gamma == other.gamma
    }

    fn check_policy(&self, policy: &TabularPolicy) -> Result<()> {
        if policy.n_states() != self.n_states || policy.n_actions() != self.n_actions {
            return Err(Error::Shape(format!(
                "policy is {}x{}, mdp expects {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.n_states,
                self.n_actions
            )));
        }
        Ok(())
    }

    /// State-to-state kernel under a policy: `P_pi[s][s'] = sum_a pi(a|s) P(s'|s,a)`.
    fn policy_kernel(&self, policy: &TabularPolicy) -> Vec<f64> {
        let n = self.n_states;
        let mut kernel = vec![0.0; n * n];
        for s in 0..n {
            for a in 0..self.n_actions {
                let p = policy.prob(s, a);
                if p == 0.0 {
                    continue;
                }
                let row = &self.transition[s][a];
                for s2 in 0..n {
                    kernel[s * n + s2] += p * row[s2];
                }
            }
        }
        kernel
    }

    /// Solves `V = r_pi + gamma P_pi V` exactly, then fills Q and A.
    pub fn policy_evaluation(&self, policy: &TabularPolicy) -> Result<ValueTables> {
        self.check_policy(policy)?;
        let n = self.n_states;
        let kernel = self.policy_kernel(policy);
        let r_pi: Vec<f64> = (0..n)
            .map(|s| (0..self.n_actions).map(|a| policy.prob(s, a) * self.reward[s][a]).sum())
            .collect();

        let v = if n <= DIRECT_SOLVE_MAX {
            // (I - gamma P_pi) V = r_pi
            let mut a = vec![0.0; n * n];
            for s in 0..n {
                for s2 in 0..n {
                    a[s * n + s2] = -self.gamma * kernel[s * n + s2];
                }
                a[s * n + s] += 1.0;
            }
            let mut b = r_pi.clone();
            lu_solve(&mut a, &mut b, n)?
        } else {
            fixed_point(n, &r_pi, FIXED_POINT_TOL * (1.0 - self.gamma), |v, out| {
                for s in 0..n {
                    let mut acc = r_pi[s];
                    for s2 in 0..n {
                        acc += self.gamma * kernel[s * n + s2] * v[s2];
                    }
                    out[s] = acc;
                }
            })
        };

        let residual = (0..n)
            .map(|s| {
                let mut acc = v[s] - r_pi[s];
                for s2 in 0..n {
                    acc -= self.gamma * kernel[s * n + s2] * v[s2];
                }
                acc.abs()
            })
            .fold(0.0, f64::max);
        if residual > SOLVE_TOL {
            return Err(Error::Solver(format!(
                "policy evaluation residual {residual:e} exceeds {SOLVE_TOL:e}"
            )));
        }

        let mut q = vec![vec![0.0; self.n_actions]; n];
        let mut adv = vec![vec![0.0; self.n_actions]; n];
        for s in 0..n {
            for a in 0..self.n_actions {
                let mut acc = self.reward[s][a];
                let row = &self.transition[s][a];
                for s2 in 0..n {
                    acc += self.gamma * row[s2] * v[s2];
                }
                q[s][a] = acc;
                adv[s][a] = acc - v[s];
            }
        }
        Ok(ValueTables { v, q, adv })
    }

    /// Solves `rho(s') = mu(s') + gamma sum_s rho(s) P_pi(s'|s)`.
    pub fn visitation_frequency(&self, policy: &TabularPolicy) -> Result<VisitationTable> {
        self.check_policy(policy)?;
        let n = self.n_states;
        let kernel = self.policy_kernel(policy);

        let rho = if n <= DIRECT_SOLVE_MAX {
            // (I - gamma P_pi^T) rho = mu
            let mut a = vec![0.0; n * n];
            for s in 0..n {
                for s2 in 0..n {
                    a[s2 * n + s] = -self.gamma * kernel[s * n + s2];
                }
            }
            for s in 0..n {
                a[s * n + s] += 1.0;
            }
            let mut b = self.mu.clone();
            lu_solve(&mut a, &mut b, n)?
        } else {
            fixed_point(n, &self.mu, FIXED_POINT_TOL * (1.0 - self.gamma), |rho, out| {
                for s2 in 0..n {
                    out[s2] = self.mu[s2];
                }
                for s in 0..n {
                    let r = self.gamma * rho[s];
                    for s2 in 0..n {
                        out[s2] += r * kernel[s * n + s2];
                    }
                }
            })
        };

        let residual = {
            let mut worst: f64 = 0.0;
            for s2 in 0..n {
                let mut acc = rho[s2] - self.mu[s2];
                for s in 0..n {
                    acc -= self.gamma * rho[s] * kernel[s * n + s2];
                }
                worst = worst.max(acc.abs());
            }
            worst
        };
        if residual > SOLVE_TOL {
            return Err(Error::Solver(format!(
                "visitation residual {residual:e} exceeds {SOLVE_TOL:e}"
            )));
        }
        let mass: f64 = rho.iter().sum();
        let expected = 1.0 / (1.0 - self.gamma);
        if (mass - expected).abs() > SOLVE_TOL * expected.max(1.0) {
            return Err(Error::Solver(format!(
                "visitation mass {mass} deviates from 1/(1-gamma) = {expected}"
            )));
        }
        Ok(VisitationTable { rho })
    }

    /// Expected discounted return `eta = mu . V`.
    pub fn expected_return(&self, policy: &TabularPolicy) -> Result<f64> {
        let values = self.policy_evaluation(policy)?;
        Ok(self.mu.iter().zip(&values.v).map(|(m, v)| m * v).sum())
    }

    /// Policy advantage of `cand` over `base`:
    /// `sum_s rho_base(s) sum_a cand(a|s) A_base(s,a)`.
    ///
    /// Evaluated both as the double sum and as the trace form
    /// `Tr(D A Pi^T)`; the two routes must agree to 1e-9.
    pub fn policy_advantage(&self, base: &TabularPolicy, cand: &TabularPolicy) -> Result<f64> {
        self.check_policy(base)?;
        self.check_policy(cand)?;
        let rho = self.visitation_frequency(base)?;
        let values = self.policy_evaluation(base)?;
        let direct = policy_advantage_from(&rho, &values.adv, cand);
        let trace = policy_advantage_trace(&rho, &values.adv, cand);
        if (direct - trace).abs() > 1e-9 {
            return Err(Error::Solver(format!(
                "policy-advantage routes disagree: {direct} vs {trace}"
            )));
        }
        Ok(direct)
    }
}

/// Double-sum form of the policy advantage from precomputed tables.
pub fn policy_advantage_from(rho: &VisitationTable, adv: &[Vec<f64>], cand: &TabularPolicy) -> f64 {
    let mut total = 0.0;
    for (s, row) in adv.iter().enumerate() {
        let mut per_state = 0.0;
        for (a, &adv_sa) in row.iter().enumerate() {
            per_state += cand.prob(s, a) * adv_sa;
        }
        total += rho.rho[s] * per_state;
    }
    total
}

/// Trace form `Tr(D A Pi^T)`: row-scale A by rho, then contract elementwise.
pub fn policy_advantage_trace(
    rho: &VisitationTable,
    adv: &[Vec<f64>],
    cand: &TabularPolicy,
) -> f64 {
    let mut scaled = vec![vec![0.0; adv[0].len()]; adv.len()];
    for (s, row) in adv.iter().enumerate() {
        for (a, &adv_sa) in row.iter().enumerate() {
            scaled[s][a] = rho.rho[s] * adv_sa;
        }
    }
    let mut trace = 0.0;
    for (s, row) in scaled.iter().enumerate() {
        for (a, &x) in row.iter().enumerate() {
            trace += x * cand.prob(s, a);
        }
    }
    trace
}

/// Iterates `cur <- step(cur)` until the L1 step size falls below `tol`.
/// Both solver maps contract at rate gamma in L1, so the remaining error is
/// at most `tol * gamma / (1 - gamma)`; callers scale `tol` by (1 - gamma).
fn fixed_point(n: usize, init: &[f64], tol: f64, step: impl Fn(&[f64], &mut [f64])) -> Vec<f64> {
    let mut cur = init.to_vec();
    let mut next = vec![0.0; n];
    for _ in 0..1_000_000 {
        step(&cur, &mut next);
        let delta: f64 = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut cur, &mut next);
        if delta < tol {
            break;
        }
    }
    cur
}

impl TabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() || probs[0].is_empty() {
            return Err(Error::Shape("policy table must be non-empty".into()));
        }
        let n_actions = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions {
                return Err(Error::Shape(format!("policy row {s} has ragged length")));
            }
            check_distribution(row, &format!("pi[{s}]"))?;
        }
        Ok(Self { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self { probs: vec![vec![p; n_actions]; n_states] }
    }

    /// Deterministic policy taking `actions[s]` in state s.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Row-wise convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &TabularPolicy, w: f64) -> Result<TabularPolicy> {
        if self.n_states() != other.n_states() || self.n_actions() != other.n_actions() {
            return Err(Error::Shape("cannot mix policies of different shapes".into()));
        }
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| w * a + (1.0 - w) * b).collect())
            .collect();
        TabularPolicy::new(probs)
    }
}

/// Per-state total-variation distance `0.5 sum_a |p(a) - q(a)|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// KL divergence `sum_a p(a) ln(p(a)/q(a))` with the 0 ln 0 = 0 convention.
/// Returns +inf when q has a zero where p is positive.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pa, &qa) in p.iter().zip(q) {
        if pa <= 0.0 {
            continue;
        }
        if qa <= 0.0 {
            return f64::INFINITY;
        }
        acc += pa * (pa / qa).ln();
    }
    acc.max(0.0)
}

/// Largest per-state TV distance between two policies.
pub fn tv_max(p: &TabularPolicy, q: &TabularPolicy) -> f64 {
    (0..p.n_states()).map(|s| tv_distance(p.row(s), q.row(s))).fold(0.0, f64::max)
}

/// Largest per-state KL divergence between two policies.
pub fn kl_max(p: &TabularPolicy, q: &TabularPolicy) -> f64 {
    (0..p.n_states()).map(|s| kl_divergence(p.row(s), q.row(s))).fold(0.0, f64::max)
}

// --- JSON interchange -------------------------------------------------------
//
// Documents look like
//   {"n_states": 2, "n_actions": 2, "gamma": ..., "mu": [...],
//    "reward": [[...]], "transition": [[[...]]]}
// with every float written with 17 significant digits so the exact bit
// pattern survives a round trip through text.

fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

fn fmt_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", parts.join(","))
}

impl FiniteMdp {
    pub fn to_json_string(&self) -> String {
        let reward_rows: Vec<String> = self.reward.iter().map(|row| fmt_vec(row)).collect();
        let transition_blocks: Vec<String> = self
            .transition
            .iter()
            .map(|per_a| {
                let rows: Vec<String> = per_a.iter().map(|row| fmt_vec(row)).collect();
                format!("[{}]", rows.join(","))
            })
            .collect();
        format!(
            "{{\"n_states\":{},\"n_actions\":{},\"gamma\":{},\"mu\":{},\"reward\":[{}],\"transition\":[{}]}}",
            self.n_states,
            self.n_actions,
            fmt_f64(self.gamma),
            fmt_vec(&self.mu),
            reward_rows.join(","),
            transition_blocks.join(",")
        )
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct RawMdp {
            n_states: usize,
            n_actions: usize,
            gamma: f64,
            mu: Vec<f64>,
            reward: Vec<Vec<f64>>,
            transition: Vec<Vec<Vec<f64>>>,
        }
        let raw: RawMdp = serde_json::from_str(text)?;
        FiniteMdp::new(raw.n_states, raw.n_actions, raw.gamma, raw.mu, raw.reward, raw.transition)
    }
}
