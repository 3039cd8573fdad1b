//! Discretization of a rate region into per-link rate levels and the finite
//! set of feasible rate-allocation vectors.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{reachable_states, LinkStateModel, LocalState};
use crate::region::{RateRegion, FEASIBILITY_TOL};

/// Default bound on the number of enumerated rate vectors.
pub const DEFAULT_VECTOR_CAP: usize = 1_000_000;

/// Per-link rate levels together with every feasible level combination.
#[derive(Debug, Clone)]
pub struct RateLevelGrid {
    levels: Vec<Vec<f64>>,
    states: Vec<LocalState>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<LocalState, usize>,
    epsilon: f64,
}

impl RateLevelGrid {
    pub fn num_links(&self) -> usize {
        self.levels.len()
    }

    /// Number of feasible rate vectors.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    /// Feasible rate vectors in lexicographic level order.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Level indices of each feasible vector, aligned with [`Self::vectors`].
    pub fn states(&self) -> &[LocalState] {
        &self.states
    }

    /// Granularity. For explicit levels this is twice the widest gap
    /// between consecutive levels, i.e. the coarsest `ε` whose `ε/2`
    /// step partition is no finer than the given levels.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn state_id(&self, state: &[u32]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Id of a rate vector, matched level by level within [`FEASIBILITY_TOL`].
    pub fn id_of_rates(&self, rates: &[f64]) -> Option<usize> {
        if rates.len() != self.num_links() {
            return None;
        }
        let mut state = Vec::with_capacity(rates.len());
        for (lv, &r) in self.levels.iter().zip(rates) {
            let j = lv.iter().position(|&x| (x - r).abs() <= FEASIBILITY_TOL)?;
            state.push(j as u32);
        }
        self.state_id(&state)
    }

    /// Largest per-link maximum rate `K̄`.
    pub fn k_hi(&self) -> f64 {
        self.levels.iter().map(|l| *l.last().unwrap()).fold(0.0, f64::max)
    }

    /// Smallest per-link maximum rate `K_lo`.
    pub fn k_lo(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| *l.last().unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    /// `⌈2K̄/ε⌉^n`, the cardinality bound used by the mixing and conductance
    /// estimates.
    pub fn cardinality_bound(&self) -> f64 {
        (2.0 * self.k_hi() / self.epsilon).ceil().powi(self.num_links() as i32)
    }
}

impl LinkStateModel for RateLevelGrid {
    fn num_links(&self) -> usize {
        self.levels.len()
    }

    fn local_rates(&self, link: usize) -> &[f64] {
        &self.levels[link]
    }

    fn admits(&self, state: &[u32], link: usize, candidate: u32) -> bool {
        // Called on the simulation hot path; avoid allocating a key.
        thread_local! {
            static KEY: std::cell::RefCell<Vec<u32>> = const { std::cell::RefCell::new(Vec::new()) };
        }
        KEY.with(|k| {
            let mut k = k.borrow_mut();
            k.clear();
            k.extend_from_slice(state);
            k[link] = candidate;
            self.index.contains_key(k.as_slice())
        })
    }
}

/// Uniform levels `0, ε/2, ε, ...` capped by `c`, with `c` itself last.
fn uniform_levels(max: f64, epsilon: f64) -> Vec<f64> {
    let step = epsilon / 2.0;
    let mut levels = Vec::new();
    let mut j = 0u64;
    loop {
        let x = j as f64 * step;
        if x >= max - FEASIBILITY_TOL {
            break;
        }
        levels.push(x);
        j += 1;
    }
    levels.push(max);
    levels
}

fn check_override(levels: &[Vec<f64>], maxima: &[f64]) -> Result<()> {
    if levels.len() != maxima.len() {
        return Err(Error::DimensionMismatch {
            expected: maxima.len(),
            got: levels.len(),
        });
    }
    for (i, (lv, &c)) in levels.iter().zip(maxima).enumerate() {
        if lv.len() < 2 || lv[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "levels of link {i} must start at 0 and have a nonzero level"
            )));
        }
        if lv.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "levels of link {i} are not strictly increasing"
            )));
        }
        let top = *lv.last().unwrap();
        if (top - c).abs() > FEASIBILITY_TOL {
            return Err(Error::InvalidGrid(format!(
                "levels of link {i} end at {top}, expected the link maximum {c}"
            )));
        }
    }
    Ok(())
}

/// Discretizes `region` with step `ε/2` per link, or with explicit levels.
pub fn discretize(
    region: &RateRegion,
    epsilon: f64,
    levels_override: Option<&[Vec<f64>]>,
) -> Result<RateLevelGrid> {
    discretize_with_cap(region, epsilon, levels_override, DEFAULT_VECTOR_CAP)
}

pub fn discretize_with_cap(
    region: &RateRegion,
    epsilon: f64,
    levels_override: Option<&[Vec<f64>]>,
    cap: usize,
) -> Result<RateLevelGrid> {
    region.validate()?;
    let maxima = region.link_maxima()?;
    let (levels, epsilon) = match levels_override {
        Some(lv) => {
            check_override(lv, &maxima)?;
            let widest = lv
                .iter()
                .flat_map(|l| l.windows(2).map(|w| w[1] - w[0]))
                .fold(0.0, f64::max);
            (lv.to_vec(), 2.0 * widest)
        }
        None => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "epsilon must be positive, got {epsilon}"
                )));
            }
            let lv = maxima.iter().map(|&c| uniform_levels(c, epsilon)).collect();
            (lv, epsilon)
        }
    };

    let states = enumerate(region, &levels, cap)?;
    let vectors: Vec<Vec<f64>> = states
        .iter()
        .map(|s| {
            s.iter()
                .enumerate()
                .map(|(i, &j)| levels[i][j as usize])
                .collect()
        })
        .collect();
    let index = states
        .iter()
        .enumerate()
        .map(|(id, s)| (s.clone(), id))
        .collect();
    let grid = RateLevelGrid {
        levels,
        states,
        vectors,
        index,
        epsilon,
    };

    let reachable = reachable_states(&grid, usize::MAX).map_or(0, |s| s.len());
    if reachable != grid.len() {
        return Err(Error::Disconnected {
            reachable,
            total: grid.len(),
        });
    }
    Ok(grid)
}

/// Depth-first enumeration over links in order. A partial assignment with
/// the remaining links at zero is the component-wise minimum of all its
/// completions, so by downward closure an infeasible prefix prunes every
/// higher level of the current link as well.
fn enumerate(region: &RateRegion, levels: &[Vec<f64>], cap: usize) -> Result<Vec<LocalState>> {
    fn visit(
        region: &RateRegion,
        levels: &[Vec<f64>],
        link: usize,
        rates: &mut Vec<f64>,
        state: &mut LocalState,
        out: &mut Vec<LocalState>,
        cap: usize,
    ) -> Result<()> {
        if link == levels.len() {
            if out.len() >= cap {
                return Err(Error::CapacityExceeded { cap });
            }
            out.push(state.clone());
            return Ok(());
        }
        for (j, &level) in levels[link].iter().enumerate() {
            rates[link] = level;
            if !region.is_feasible(rates)? {
                break;
            }
            state[link] = j as u32;
            visit(region, levels, link + 1, rates, state, out, cap)?;
        }
        rates[link] = 0.0;
        state[link] = 0;
        Ok(())
    }

    let n = levels.len();
    let mut out = Vec::new();
    visit(
        region,
        levels,
        0,
        &mut vec![0.0; n],
        &mut vec![0; n],
        &mut out,
        cap,
    )?;
    Ok(out)
}
