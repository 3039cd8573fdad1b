//! Arrival processes with increments at integral times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-link arrival law. Increments land at `t = 1, 2, 3, ...` and lie in
/// `[0, K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Each slot adds `increment` with probability `rate / increment`.
    BernoulliScaled { rates: Vec<f64>, increment: f64 },
    /// Every `period`-th slot adds `batch`; slots in between are empty.
    DeterministicBatch { batch: Vec<f64>, period: u64 },
    /// Per-slot increments replayed cyclically; `slots[k][i]` is link
    /// `i`'s increment in slot `k + 1`.
    TraceReplay { slots: Vec<Vec<f64>> },
}

impl ArrivalProcess {
    /// Independent Bernoulli arrivals of unit size.
    pub fn bernoulli(rates: &[f64]) -> Self {
        ArrivalProcess::BernoulliScaled {
            rates: rates.to_vec(),
            increment: 1.0,
        }
    }

    pub fn num_links(&self) -> usize {
        match self {
            ArrivalProcess::BernoulliScaled { rates, .. } => rates.len(),
            ArrivalProcess::DeterministicBatch { batch, .. } => batch.len(),
            ArrivalProcess::TraceReplay { slots } => slots.first().map_or(0, Vec::len),
        }
    }

    /// Mean increment per slot, `λ_i = E[A_i(1)]`.
    pub fn mean_rates(&self) -> Vec<f64> {
        match self {
            ArrivalProcess::BernoulliScaled { rates, .. } => rates.clone(),
            ArrivalProcess::DeterministicBatch { batch, period } => {
                batch.iter().map(|b| b / *period as f64).collect()
            }
            ArrivalProcess::TraceReplay { slots } => {
                let n = self.num_links();
                let mut m = vec![0.0; n];
                for s in slots {
                    for (acc, x) in m.iter_mut().zip(s) {
                        *acc += x / slots.len() as f64;
                    }
                }
                m
            }
        }
    }

    /// Largest possible increment `K`.
    pub fn increment_bound(&self) -> f64 {
        match self {
            ArrivalProcess::BernoulliScaled { increment, .. } => *increment,
            ArrivalProcess::DeterministicBatch { batch, .. } => {
                batch.iter().copied().fold(0.0, f64::max)
            }
            ArrivalProcess::TraceReplay { slots } => slots
                .iter()
                .flat_map(|s| s.iter().copied())
                .fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("arrivals: {m}")));
        match self {
            ArrivalProcess::BernoulliScaled { rates, increment } => {
                if !(*increment > 0.0 && increment.is_finite()) {
                    return bad("increment must be positive");
                }
                if rates.iter().any(|&r| !(r >= 0.0 && r < *increment)) {
                    return bad("rates must lie in [0, increment) so empty slots occur");
                }
            }
            ArrivalProcess::DeterministicBatch { batch, period } => {
                if *period < 2 {
                    return bad("period must be at least 2 so empty slots occur");
                }
                if batch.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
                    return bad("batch sizes must be finite and nonnegative");
                }
            }
            ArrivalProcess::TraceReplay { slots } => {
                let n = self.num_links();
                if slots.is_empty() || n == 0 {
                    return bad("trace is empty");
                }
                if slots.iter().any(|s| s.len() != n) {
                    return bad("ragged trace");
                }
                if slots.iter().flatten().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return bad("trace increments must be finite and nonnegative");
                }
                for i in 0..n {
                    if slots.iter().all(|s| s[i] > 0.0) {
                        return bad("every link needs at least one empty slot");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Draws per-slot increments, one RNG stream per link.
#[derive(Debug, Clone)]
pub struct ArrivalSampler {
    process: ArrivalProcess,
    streams: Vec<ChaCha8Rng>,
}

impl ArrivalSampler {
    /// Link `i` draws from stream `first_stream + i` of the master seed.
    pub fn new(process: ArrivalProcess, seed: u64, first_stream: u64) -> Self {
        let streams = (0..process.num_links() as u64)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(first_stream + i);
                rng
            })
            .collect();
        ArrivalSampler { process, streams }
    }

    pub fn process(&self) -> &ArrivalProcess {
        &self.process
    }

    /// Increments for slot `slot >= 1`, written into `out`.
    pub fn sample(&mut self, slot: u64, out: &mut [f64]) {
        match &self.process {
            ArrivalProcess::BernoulliScaled { rates, increment } => {
                for ((o, rng), &r) in out.iter_mut().zip(&mut self.streams).zip(rates) {
                    *o = if rng.random::<f64>() < r / increment {
                        *increment
                    } else {
                        0.0
                    };
                }
            }
            ArrivalProcess::DeterministicBatch { batch, period } => {
                let hit = slot % period == 0;
                for (o, &b) in out.iter_mut().zip(batch) {
                    *o = if hit { b } else { 0.0 };
                }
            }
            ArrivalProcess::TraceReplay { slots } => {
                let row = &slots[((slot - 1) % slots.len() as u64) as usize];
                out.copy_from_slice(row);
            }
        }
    }
}
