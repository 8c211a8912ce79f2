//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimension mismatch between tables that must agree in shape.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A probability table failed validation at construction.
    #[error("invalid distribution: {0}")]
    Distribution(String),

    /// Bad experiment configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A state has (numerically) zero discounted visitation mass, so the
    /// visitation-weighted rescaling is undefined for this agent.
    #[error("state {state} unreachable for agent {agent} (rho = {rho:.3e})")]
    UnreachableState { agent: usize, state: usize, rho: f64 },

    /// A linear solve or fixed-point iteration failed to reach tolerance.
    #[error("solver failed: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
