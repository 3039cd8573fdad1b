//! Mixing and conductance analysis of reversible chains.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::chain::{AllocationChain, Dtmc, EXACT_STATE_LIMIT};
use crate::distribution::Distribution;
use crate::error::{Error, Result};

/// Largest chain for exhaustive subset enumeration in [`conductance`].
pub const CONDUCTANCE_STATE_LIMIT: usize = 20;

/// Eigenvalue moduli at or above `1 - SLEM_TOL` count as 1.
const SLEM_TOL: f64 = 1e-10;

/// Solves `π G = 0, Σπ = 1` for a generator-like matrix `G` (a rate matrix,
/// or `P - I`) by replacing one balance equation with the normalization.
pub fn null_space_stationary(g: &DMatrix<f64>) -> Result<Distribution> {
    let n = g.nrows();
    if n == 0 || g.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.ncols(),
        });
    }
    let mut a = g.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .full_piv_lu()
        .solve(&b)
        .ok_or_else(|| Error::Config("singular balance system; chain is reducible".into()))?;
    Ok(Distribution::from_weights(x.iter().copied().collect()))
}

/// Second largest eigenvalue modulus of a reversible chain with stationary
/// law `pi`, via the symmetric similarity `D^{1/2} P D^{-1/2}`.
pub fn slem(dtmc: &Dtmc, pi: &Distribution) -> f64 {
    let p = dtmc.matrix();
    let n = p.nrows();
    if n < 2 {
        return 0.0;
    }
    let sq: Vec<f64> = pi.probs().iter().map(|x| x.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| sq[i] * p[(i, j)] / sq[j]);
    let sym = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    // Drop the Perron eigenvalue (the one closest to 1).
    let top = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(k, _)| k)
        .unwrap();
    eig.swap_remove(top);
    eig.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Exact conductance `min F(S)/π(S)` over every nonempty `S` with
/// `π(S) <= ½`, where `F(S)` sums off-diagonal flow leaving `S`.
pub fn conductance(dtmc: &Dtmc) -> Result<f64> {
    let n = dtmc.len();
    if n > CONDUCTANCE_STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states: n,
            limit: CONDUCTANCE_STATE_LIMIT,
        });
    }
    let pi = dtmc.stationary()?;
    let pi = pi.probs();
    let p = dtmc.matrix();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << n) - 1 {
        let inside = |x: usize| mask & (1 << x) != 0;
        let mass: f64 = (0..n).filter(|&x| inside(x)).map(|x| pi[x]).sum();
        if mass > 0.5 + 1e-12 {
            continue;
        }
        let mut flow = 0.0;
        for x in (0..n).filter(|&x| inside(x)) {
            for y in (0..n).filter(|&y| !inside(y)) {
                flow += pi[x] * p[(x, y)];
            }
        }
        best = best.min(flow / mass);
    }
    Ok(best)
}

/// `exp(-2K̄(n+1)‖v‖_∞) / (n e C)` with `C` the chain's cardinality bound.
pub fn conductance_lower_bound(chain: &AllocationChain) -> f64 {
    let n = chain.num_links() as f64;
    (-2.0 * chain.max_rate() * (n + 1.0) * chain.v_inf()).exp()
        / (n * std::f64::consts::E * chain.cardinality_bound())
}

/// `exp(-2K̄n‖v‖_∞) / C`, the floor on every stationary probability when
/// the state count is at most `C`.
pub fn stationary_lower_bound(chain: &AllocationChain) -> f64 {
    let n = chain.num_links() as f64;
    (-2.0 * chain.max_rate() * n * chain.v_inf()).exp() / chain.cardinality_bound()
}

/// Outcome of a mixing-time estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingBound {
    /// Step count after which the TV distance is at most `rho`.
    pub steps: f64,
    pub alpha_min: f64,
    pub slem: f64,
    /// Whether `alpha_min` and `slem` are exact or bound-derived.
    pub exact: bool,
}

fn mixing_steps(alpha_min: f64, slem: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Config(format!("rho must lie in (0, 1), got {rho}")));
    }
    if slem >= 1.0 - SLEM_TOL {
        return Err(Error::NotMixing);
    }
    if slem <= f64::MIN_POSITIVE {
        return Ok(1.0);
    }
    let steps = (0.5 * (1.0 / alpha_min).ln() + (1.0 / rho).ln()) / (1.0 / slem).ln();
    Ok(steps.max(1.0))
}

/// `(½ log(1/α_min) + log(1/ρ)) / log(1/σ_max)` from the exact stationary
/// law and SLEM of `dtmc`.
pub fn mixing_time_bound(dtmc: &Dtmc, rho: f64) -> Result<MixingBound> {
    if dtmc.len() > EXACT_STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states: dtmc.len(),
            limit: EXACT_STATE_LIMIT,
        });
    }
    let pi = dtmc.stationary()?;
    let alpha_min = pi.min();
    let slem = slem(dtmc, &pi);
    Ok(MixingBound {
        steps: mixing_steps(alpha_min, slem, rho)?,
        alpha_min,
        slem,
        exact: true,
    })
}

/// Mixing estimate for the uniformized chain. Small chains use exact
/// quantities; larger ones fall back to `σ_max <= 1 - Φ²/2` with the
/// conductance and stationary floors.
pub fn chain_mixing_bound(chain: &AllocationChain, rho: f64) -> Result<MixingBound> {
    if chain.len() <= EXACT_STATE_LIMIT {
        return mixing_time_bound(&chain.uniformize()?, rho);
    }
    let phi = conductance_lower_bound(chain);
    let slem = 1.0 - phi * phi / 2.0;
    let alpha_min = stationary_lower_bound(chain);
    Ok(MixingBound {
        steps: mixing_steps(alpha_min, slem, rho)?,
        alpha_min,
        slem,
        exact: false,
    })
}
