//! Differentiable policy and value parameterizations.
//!
//! Two flavors: a tabular-softmax table of logits, and a one-hidden-layer
//! tanh MLP over one-hot state encodings with a categorical softmax head.
//! Gradients are reverse-accumulated by hand; both parameterizations are
//! checked against central finite differences in the tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::TabularPolicy;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "parameterization", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    TabularSoftmax { n_states: usize, n_actions: usize },
    Mlp { n_states: usize, n_actions: usize, hidden: usize },
}

impl Architecture {
    pub fn param_len(&self) -> usize {
        match *self {
            Architecture::TabularSoftmax { n_states, n_actions } => n_states * n_actions,
            Architecture::Mlp { n_states, n_actions, hidden } => {
                hidden * n_states + hidden + n_actions * hidden + n_actions
            }
        }
    }

    pub fn n_states(&self) -> usize {
        match *self {
            Architecture::TabularSoftmax { n_states, .. } => n_states,
            Architecture::Mlp { n_states, .. } => n_states,
        }
    }

    pub fn n_actions(&self) -> usize {
        match *self {
            Architecture::TabularSoftmax { n_actions, .. } => n_actions,
            Architecture::Mlp { n_actions, .. } => n_actions,
        }
    }
}

/// Softmax-parameterized stochastic policy. Any real parameter vector maps
/// to a valid distribution per state, so parameter averaging is closed.
#[derive(Debug, Clone)]
pub struct SoftmaxPolicy {
    arch: Architecture,
    pub theta: Vec<f64>,
}

impl SoftmaxPolicy {
    /// Zero parameters: the uniform policy for both parameterizations.
    pub fn zeros(arch: Architecture) -> Self {
        Self { arch, theta: vec![0.0; arch.param_len()] }
    }

    pub fn init_random(arch: Architecture, scale: f64, stream: &mut RngStream) -> Self {
        let theta = match arch {
            Architecture::TabularSoftmax { .. } => vec![0.0; arch.param_len()],
            Architecture::Mlp { n_states, n_actions, hidden } => {
                let mut theta = Vec::with_capacity(arch.param_len());
                let w1_bound = scale / (n_states as f64).sqrt();
                for _ in 0..hidden * n_states {
                    theta.push((stream.next_f64() * 2.0 - 1.0) * w1_bound);
                }
                theta.extend(std::iter::repeat(0.0).take(hidden));
                let w2_bound = scale / (hidden as f64).sqrt();
                for _ in 0..n_actions * hidden {
                    theta.push((stream.next_f64() * 2.0 - 1.0) * w2_bound);
                }
                theta.extend(std::iter::repeat(0.0).take(n_actions));
                theta
            }
        };
        Self { arch, theta }
    }

    pub fn from_parts(arch: Architecture, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != arch.param_len() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, architecture needs {}",
                theta.len(),
                arch.param_len()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("parameters must be finite".into()));
        }
        Ok(Self { arch, theta })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    fn mlp_slices(&self) -> (usize, usize, usize) {
        match self.arch {
            Architecture::Mlp { n_states, hidden, .. } => {
                let w1_end = hidden * n_states;
                let b1_end = w1_end + hidden;
                let w2_end = b1_end + self.arch.n_actions() * hidden;
                (w1_end, b1_end, w2_end)
            }
            _ => unreachable!("mlp layout requested for tabular parameterization"),
        }
    }

    /// Hidden activations for a one-hot state input.
    fn hidden(&self, s: usize) -> Vec<f64> {
        match self.arch {
            Architecture::Mlp { n_states, hidden, .. } => {
                let (w1_end, _, _) = self.mlp_slices();
                let w1 = &self.theta[..w1_end];
                let b1 = &self.theta[w1_end..w1_end + hidden];
                (0..hidden).map(|h| (w1[h * n_states + s] + b1[h]).tanh()).collect()
            }
            _ => unreachable!(),
        }
    }

    pub fn logits(&self, s: usize) -> Vec<f64> {
        match self.arch {
            Architecture::TabularSoftmax { n_actions, .. } => {
                self.theta[s * n_actions..(s + 1) * n_actions].to_vec()
            }
            Architecture::Mlp { n_actions, hidden, .. } => {
                let (_, b1_end, w2_end) = self.mlp_slices();
                let w2 = &self.theta[b1_end..w2_end];
                let b2 = &self.theta[w2_end..];
                let hid = self.hidden(s);
                (0..n_actions)
                    .map(|a| {
                        let mut z = b2[a];
                        for (h, &hv) in hid.iter().enumerate() {
                            z += w2[a * hidden + h] * hv;
                        }
                        z
                    })
                    .collect()
            }
        }
    }

    /// Action distribution at state s (numerically stable softmax).
    pub fn probs(&self, s: usize) -> Vec<f64> {
        softmax(&self.logits(s))
    }

    /// Reverse accumulation: adds d(loss)/d(theta) to `grad` given
    /// d(loss)/d(logits) at state s.
    pub fn accumulate_logit_grad(&self, s: usize, dlogits: &[f64], grad: &mut [f64]) {
        match self.arch {
            Architecture::TabularSoftmax { n_actions, .. } => {
                for (a, &d) in dlogits.iter().enumerate() {
                    grad[s * n_actions + a] += d;
                }
            }
            Architecture::Mlp { n_states, n_actions, hidden } => {
                let (w1_end, b1_end, w2_end) = self.mlp_slices();
                let hid = self.hidden(s);
                // d logits / d (w2, b2)
                for a in 0..n_actions {
                    let d = dlogits[a];
                    if d == 0.0 {
                        continue;
                    }
                    for (h, &hv) in hid.iter().enumerate() {
                        grad[b1_end + a * hidden + h] += d * hv;
                    }
                    grad[w2_end + a] += d;
                }
                // back through tanh into (w1, b1); input is one-hot at s
                let w2 = &self.theta[b1_end..w2_end];
                for (h, &hv) in hid.iter().enumerate() {
                    let mut dh = 0.0;
                    for (a, &d) in dlogits.iter().enumerate() {
                        dh += d * w2[a * hidden + h];
                    }
                    let dpre = dh * (1.0 - hv * hv);
                    grad[h * n_states + s] += dpre;
                    grad[w1_end + h] += dpre;
                }
            }
        }
    }

    pub fn to_tabular(&self) -> TabularPolicy {
        let rows = (0..self.arch.n_states()).map(|s| self.probs(s)).collect();
        TabularPolicy::new(rows).expect("softmax rows are stochastic")
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// State-value estimator with the same two parameterizations.
#[derive(Debug, Clone)]
pub struct ValueEstimator {
    kind: ValueArch,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueArch {
    Table { n_states: usize },
    Mlp { n_states: usize, hidden: usize },
}

impl ValueArch {
    fn param_len(&self) -> usize {
        match *self {
            ValueArch::Table { n_states } => n_states,
            ValueArch::Mlp { n_states, hidden } => hidden * n_states + hidden + hidden + 1,
        }
    }
}

impl ValueEstimator {
    pub fn zeros(kind: ValueArch) -> Self {
        Self { kind, theta: vec![0.0; kind.param_len()] }
    }

    pub fn init_random(kind: ValueArch, scale: f64, stream: &mut RngStream) -> Self {
        let mut estimator = Self::zeros(kind);
        if let ValueArch::Mlp { n_states, hidden } = kind {
            let w1_bound = scale / (n_states as f64).sqrt();
            for x in estimator.theta[..hidden * n_states].iter_mut() {
                *x = (stream.next_f64() * 2.0 - 1.0) * w1_bound;
            }
            let (_, b1_end, w2_end) = mlp_value_slices(n_states, hidden);
            let w2_bound = scale / (hidden as f64).sqrt();
            for x in estimator.theta[b1_end..w2_end].iter_mut() {
                *x = (stream.next_f64() * 2.0 - 1.0) * w2_bound;
            }
        }
        estimator
    }

    pub fn predict(&self, s: usize) -> f64 {
        match self.kind {
            ValueArch::Table { .. } => self.theta[s],
            ValueArch::Mlp { n_states, hidden } => {
                let (w1_end, b1_end, w2_end) = mlp_value_slices(n_states, hidden);
                let b1 = &self.theta[w1_end..b1_end];
                let w2 = &self.theta[b1_end..w2_end];
                let b2 = self.theta[w2_end];
                let mut out = b2;
                for h in 0..hidden {
                    let hid = (self.theta[h * n_states + s] + b1[h]).tanh();
                    out += w2[h] * hid;
                }
                out
            }
        }
    }

    /// Adds d(loss)/d(theta) to `grad` given d(loss)/d(prediction) at s.
    pub fn accumulate_grad(&self, s: usize, dout: f64, grad: &mut [f64]) {
        match self.kind {
            ValueArch::Table { .. } => grad[s] += dout,
            ValueArch::Mlp { n_states, hidden } => {
                let (w1_end, b1_end, w2_end) = mlp_value_slices(n_states, hidden);
                let b1 = &self.theta[w1_end..b1_end];
                let w2 = &self.theta[b1_end..w2_end];
                for h in 0..hidden {
                    let hid = (self.theta[h * n_states + s] + b1[h]).tanh();
                    grad[b1_end + h] += dout * hid;
                    let dpre = dout * w2[h] * (1.0 - hid * hid);
                    grad[h * n_states + s] += dpre;
                    grad[w1_end + h] += dpre;
                }
                grad[w2_end] += dout;
            }
        }
    }
}

fn mlp_value_slices(n_states: usize, hidden: usize) -> (usize, usize, usize) {
    let w1_end = hidden * n_states;
    let b1_end = w1_end + hidden;
    let w2_end = b1_end + hidden;
    (w1_end, b1_end, w2_end)
}
