use thiserror::Error;

/// Errors produced by the rate-allocation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("link {link} out of range for {links} links")]
    InvalidLink { link: usize, links: usize },

    #[error("invalid rate region: {0}")]
    InvalidRegion(String),

    #[error("invalid rate-level grid: {0}")]
    InvalidGrid(String),

    #[error("enumeration exceeded the cap of {cap} rate vectors")]
    CapacityExceeded { cap: usize },

    #[error("rate-vector set is not connected under single-link moves ({reachable} of {total} reachable from zero)")]
    Disconnected { reachable: usize, total: usize },

    #[error("{states} states exceed the exact-analysis limit of {limit}; use the bound/simulation path")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("support violation: state {state} has mass under mu but not under pi")]
    SupportViolation { state: usize },

    #[error("second largest eigenvalue modulus is 1 (reducible or periodic chain)")]
    NotMixing,

    #[error("ascent did not converge in {iterations} iterations (grad norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        last: Vec<f64>,
    },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("invalid white-space network: {0}")]
    InvalidNetwork(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation error: {0}")]
    Simulation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
