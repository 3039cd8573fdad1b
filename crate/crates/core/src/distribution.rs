use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`Distribution`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A probability mass function over dense state ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates nonnegativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Config("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL * probs.len().max(1) as f64 {
            return Err(Error::Config(format!("probabilities sum to {total}")));
        }
        Ok(Distribution { probs })
    }

    /// Normalizes nonnegative weights. Tiny negative round-off is clipped.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let clipped: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        Distribution {
            probs: clipped.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Distribution { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Distribution {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn same_space(mu: &Distribution, pi: &Distribution) -> Result<()> {
    if mu.len() != pi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len(),
            got: mu.len(),
        });
    }
    Ok(())
}

/// `D(μ‖π) = Σ μ log(μ/π)` with `0 log 0 = 0`.
pub fn kl_divergence(mu: &Distribution, pi: &Distribution) -> Result<f64> {
    same_space(mu, pi)?;
    let mut d = 0.0;
    for (state, (&m, &p)) in mu.probs.iter().zip(&pi.probs).enumerate() {
        if m == 0.0 {
            continue;
        }
        if p == 0.0 {
            return Err(Error::SupportViolation { state });
        }
        d += m * (m / p).ln();
    }
    Ok(d.max(0.0))
}

/// `½ Σ |μ - π|`.
pub fn tv_distance(mu: &Distribution, pi: &Distribution) -> Result<f64> {
    same_space(mu, pi)?;
    Ok(0.5
        * mu.probs
            .iter()
            .zip(&pi.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}
