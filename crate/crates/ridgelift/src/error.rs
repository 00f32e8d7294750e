//! Error types shared across the crate.

use thiserror::Error;

/// Unified error type for model construction, sampling, recovery and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum RidgeError {
    /// A parameter was outside its admissible range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A query point left the working domain of the function.
    #[error("point outside domain: |x| = {norm:.6e} exceeds radius {radius:.6e}")]
    Domain { norm: f64, radius: f64 },

    /// Matrix/vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation required more nonzero singular values than available.
    #[error("degenerate spectrum: sigma_{index} = {value:.3e} below threshold")]
    Degenerate { index: usize, value: f64 },

    /// Iterative solver exhausted its budget without meeting its exit test.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.6e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Grid size exceeded the configured node cap.
    #[error("grid of {requested} nodes exceeds budget cap {cap}")]
    Budget { requested: usize, cap: usize },

    /// Minimal-measurement search hit its cap without success.
    #[error("search exhausted at m_phi = {cap} without meeting the criterion")]
    SearchExhausted { cap: usize },

    /// Planned sample sizes violate the m_phi < m_x * d precondition.
    #[error(
        "infeasible plan: m_phi_min = {m_phi_min} >= m_x * d = {product} (m_x = {m_x}, d = {d})"
    )]
    Infeasible {
        m_x: usize,
        d: usize,
        m_phi_min: usize,
        product: usize,
    },

    /// Malformed configuration or serialized file.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RidgeError>;

impl RidgeError {
    pub fn argument(msg: impl Into<String>) -> Self {
        RidgeError::Argument(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        RidgeError::Shape(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        RidgeError::Parse(msg.into())
    }
}
