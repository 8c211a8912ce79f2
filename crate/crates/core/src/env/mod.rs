//! Seeded generators for heterogeneous agent families and trajectory sampling.

mod garnet;
mod gridworld;
mod sampler;

pub use garnet::{make_garnet_family, GarnetSpec};
pub use gridworld::{make_gridworld_family, GoalCell, GridSpec, InitRegions};
pub use sampler::{mean_episode_return, sample_trajectory, TrajectoryBatch, Transition};
