//! Federated reinforcement-learning laboratory on exactly solvable finite
//! MDPs.
//!
//! The crate provides:
//!
//! * exact tabular solvers for values, advantages, visitation frequencies
//!   and policy advantages ([`mdp`]);
//! * seeded generators for heterogeneous agent families and trajectory
//!   sampling ([`env`]);
//! * closed-form heterogeneity analysis with the deviation-norm level and
//!   the visitation-rescaled G diagnostic ([`hetero`]);
//! * numerical certification of the policy-improvement bounds ([`bounds`],
//!   [`sweep`]);
//! * the exact federated policy iteration with monotone improvement and the
//!   sampled KL-penalized federated trainer with FedAvg / FedProx baselines
//!   ([`fed`], [`trainer`]);
//! * a configuration-driven CLI ([`cli`], [`config`], [`report`]).

pub mod bounds;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod fed;
pub mod hetero;
mod linalg;
pub mod mdp;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod trainer;
pub mod util;

pub use error::{Error, Result};
