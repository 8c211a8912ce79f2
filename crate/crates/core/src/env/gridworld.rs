//! Gridworld family generator.
//!
//! All agents share the same field, action set and reward layout. The two
//! heterogeneity knobs are the per-agent start region (initial-state type)
//! and the per-agent action-replacement noise (dynamics type): with
//! probability `sigma_n` the chosen action is swapped for a uniformly random
//! one, which is the discrete analog of adding noise to continuous actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::FiniteMdp;

/// Goal cell with its terminal reward. Goals are absorbing: they self-loop
/// with zero reward, so infinite-horizon solvers and episodic sampling agree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalCell {
    pub x: usize,
    pub y: usize,
    pub reward: f64,
}

/// How start cells are assigned to agents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitRegions {
    /// Every agent starts uniformly over all non-goal cells.
    Shared,
    /// Non-goal cells are split into vertical bands, one per agent.
    Columns,
    /// Explicit per-agent cell lists, `cells[agent] = [[x, y], ...]`.
    Cells(Vec<Vec<[usize; 2]>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub slip_prob: f64,
    pub goal_cells: Vec<GoalCell>,
    pub step_penalty: f64,
    pub n_agents: usize,
    pub init_regions: InitRegions,
    /// Per-agent probability that the chosen action is replaced by a
    /// uniformly random one.
    pub dynamics_noise: Vec<f64>,
}

fn default_gamma() -> f64 {
    0.99
}

const ACTIONS: usize = 4; // N, S, E, W

impl GridSpec {
    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(Error::Config(format!("slip_prob {} outside [0, 1]", self.slip_prob)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.dynamics_noise.len() != self.n_agents {
            return Err(Error::Config(format!(
                "dynamics_noise has {} entries, expected one per agent ({})",
                self.dynamics_noise.len(),
                self.n_agents
            )));
        }
        if self.dynamics_noise.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return Err(Error::Config("dynamics_noise entries must lie in [0, 1]".into()));
        }
        for g in &self.goal_cells {
            if g.x >= self.width || g.y >= self.height {
                return Err(Error::Config(format!("goal cell ({}, {}) outside grid", g.x, g.y)));
            }
        }
        if self.goal_cells.len() >= self.n_states() {
            return Err(Error::Config("no non-goal cells left to start from".into()));
        }
        Ok(())
    }
}

struct Layout {
    width: usize,
    height: usize,
    is_goal: Vec<bool>,
    goal_reward: Vec<f64>,
}

impl Layout {
    fn new(spec: &GridSpec) -> Self {
        let n = spec.n_states();
        let mut is_goal = vec![false; n];
        let mut goal_reward = vec![0.0; n];
        for g in &spec.goal_cells {
            let s = g.y * spec.width + g.x;
            is_goal[s] = true;
            goal_reward[s] = g.reward;
        }
        Layout { width: spec.width, height: spec.height, is_goal, goal_reward }
    }

    fn step(&self, s: usize, action: usize) -> usize {
        let (x, y) = (s % self.width, s / self.width);
        let (nx, ny) = match action {
            0 => (x, y.saturating_sub(1)),
            1 => (x, (y + 1).min(self.height - 1)),
            2 => ((x + 1).min(self.width - 1), y),
            _ => (x.saturating_sub(1), y),
        };
        ny * self.width + nx
    }
}

/// Lateral slip directions for each action (perpendicular pair).
fn lateral(action: usize) -> [usize; 2] {
    match action {
        0 | 1 => [2, 3],
        _ => [0, 1],
    }
}

fn base_dynamics(spec: &GridSpec, layout: &Layout) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    let n = spec.n_states();
    let mut transition = vec![vec![vec![0.0; n]; ACTIONS]; n];
    let mut reward = vec![vec![0.0; ACTIONS]; n];
    for s in 0..n {
        for a in 0..ACTIONS {
            if layout.is_goal[s] {
                transition[s][a][s] = 1.0;
                continue;
            }
            let main = layout.step(s, a);
            transition[s][a][main] += 1.0 - spec.slip_prob;
            for lat in lateral(a) {
                transition[s][a][layout.step(s, lat)] += spec.slip_prob / 2.0;
            }
            let mut r = spec.step_penalty;
            for (s2, &p) in transition[s][a].iter().enumerate() {
                if layout.is_goal[s2] {
                    r += p * layout.goal_reward[s2];
                }
            }
            reward[s][a] = r;
        }
    }
    (transition, reward)
}

fn region_cells(spec: &GridSpec, layout: &Layout, agent: usize) -> Result<Vec<usize>> {
    let n = spec.n_states();
    let cells: Vec<usize> = match &spec.init_regions {
        InitRegions::Shared => (0..n).filter(|&s| !layout.is_goal[s]).collect(),
        InitRegions::Columns => {
            let lo = agent * spec.width / spec.n_agents;
            let hi = (agent + 1) * spec.width / spec.n_agents;
            (0..n)
                .filter(|&s| {
                    let x = s % spec.width;
                    !layout.is_goal[s] && x >= lo && x < hi
                })
                .collect()
        }
        InitRegions::Cells(per_agent) => {
            if per_agent.len() != spec.n_agents {
                return Err(Error::Config(format!(
                    "init_regions lists {} agents, expected {}",
                    per_agent.len(),
                    spec.n_agents
                )));
            }
            let mut cells = Vec::new();
            for &[x, y] in &per_agent[agent] {
                if x >= spec.width || y >= spec.height {
                    return Err(Error::Config(format!("start cell ({x}, {y}) outside grid")));
                }
                let s = y * spec.width + x;
                if layout.is_goal[s] {
                    return Err(Error::Config(format!("start cell ({x}, {y}) is a goal cell")));
                }
                cells.push(s);
            }
            cells
        }
    };
    if cells.is_empty() {
        return Err(Error::Config(format!("agent {agent} has an empty start region")));
    }
    Ok(cells)
}

/// Builds one MDP per agent. All agents share states, actions and the base
/// field; they differ in `mu_n` (start region) and in the noise-composed
/// dynamics `P_n = (1 - sigma_n) P_base + sigma_n mean_a' P_base(.|., a')`.
pub fn make_gridworld_family(spec: &GridSpec) -> Result<Vec<FiniteMdp>> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let n = spec.n_states();
    let (base_p, base_r) = base_dynamics(spec, &layout);

    let mut family = Vec::with_capacity(spec.n_agents);
    for agent in 0..spec.n_agents {
        let sigma = spec.dynamics_noise[agent];
        let mut transition = vec![vec![vec![0.0; n]; ACTIONS]; n];
        let mut reward = vec![vec![0.0; ACTIONS]; n];
        for s in 0..n {
            let mean_row: Vec<f64> = (0..n)
                .map(|s2| (0..ACTIONS).map(|a| base_p[s][a][s2]).sum::<f64>() / ACTIONS as f64)
                .collect();
            let mean_reward: f64 = (0..ACTIONS).map(|a| base_r[s][a]).sum::<f64>() / ACTIONS as f64;
            for a in 0..ACTIONS {
                for s2 in 0..n {
                    transition[s][a][s2] = (1.0 - sigma) * base_p[s][a][s2] + sigma * mean_row[s2];
                }
                reward[s][a] = (1.0 - sigma) * base_r[s][a] + sigma * mean_reward;
            }
        }
        let cells = region_cells(spec, &layout, agent)?;
        let mut mu = vec![0.0; n];
        let w = 1.0 / cells.len() as f64;
        for &c in &cells {
            mu[c] = w;
        }
        family.push(FiniteMdp::new(n, ACTIONS, spec.gamma, mu, reward, transition)?);
    }
    Ok(family)
}
