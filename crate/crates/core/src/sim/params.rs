//! Parameter choices under which the adaptive controller is provably
//! throughput-optimal. `T` is astronomically large for any realistic `n`;
//! these are reported, not simulated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalParams {
    /// Step size `α = ε² / C(n)`.
    pub alpha: f64,
    /// Projection radius `D`.
    pub projection: f64,
    /// Update interval `T`.
    pub interval: f64,
    /// Interval count `N = 7·3^5·n·D² / (α ε²)` over which the averaged
    /// service rate exceeds the arrival rate.
    pub intervals: f64,
    /// `C(n) = 3^5 (2K̄ + K)² (K̄² n²/2 + n)`.
    pub c_n: f64,
}

/// `n` links, slack `ε`, increment bound `K`, rate bounds `K̄` and `K_lo`,
/// and the unspecified constant `K̂` in the interval length.
pub fn theoretical_params(
    n: usize,
    epsilon: f64,
    k: f64,
    k_hi: f64,
    k_lo: f64,
    k_hat: f64,
) -> Result<TheoreticalParams> {
    if n == 0 || [epsilon, k, k_hi, k_lo, k_hat].iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Config("all parameters must be positive".into()));
    }
    let nf = n as f64;
    let c_n = 243.0 * (2.0 * k_hi + k).powi(2) * (k_hi * k_hi * nf * nf / 2.0 + nf);
    let alpha = epsilon * epsilon / c_n;
    let projection = 16.0 * k_hi / k_lo * nf / epsilon * (2.0 * k_hi / epsilon).ceil().ln() + k_hi;
    let interval = (k_hat * nf * nf / epsilon * (nf / epsilon).ln()).exp();
    let intervals = 7.0 * 243.0 * nf * projection * projection / (alpha * epsilon * epsilon);
    Ok(TheoreticalParams {
        alpha,
        projection,
        interval,
        intervals,
        c_n,
    })
}
