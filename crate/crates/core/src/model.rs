//! The local-state abstraction shared by the rate-level grid and the
//! white-space scheduler.
//!
//! Each link owns a finite list of candidate local states (rate levels, or
//! band subsets). Candidate 0 is always the idle state with rate 0. A
//! global state is one candidate index per link; a link may switch to a
//! candidate only if the resulting global state is admissible.

use std::collections::{HashSet, VecDeque};

/// Candidate index per link.
pub type LocalState = Vec<u32>;

pub trait LinkStateModel {
    fn num_links(&self) -> usize;

    /// Rate contributed by each candidate local state of `link`.
    fn local_rates(&self, link: usize) -> &[f64];

    /// Whether replacing `link`'s candidate in `state` by `candidate` gives
    /// an admissible global state. `state` itself is assumed admissible.
    fn admits(&self, state: &[u32], link: usize, candidate: u32) -> bool;

    /// External label of a candidate, e.g. a band bitmask. Defaults to the
    /// candidate index.
    fn candidate_label(&self, _link: usize, candidate: u32) -> u64 {
        candidate as u64
    }

    /// Rate vector of a global state.
    fn rate_vector(&self, state: &[u32]) -> Vec<f64> {
        state
            .iter()
            .enumerate()
            .map(|(i, &c)| self.local_rates(i)[c as usize])
            .collect()
    }

    /// Largest single-link rate over all links and candidates.
    fn max_rate(&self) -> f64 {
        (0..self.num_links())
            .flat_map(|i| self.local_rates(i).iter().copied())
            .fold(0.0, f64::max)
    }

    /// Maximum number of outgoing single-link moves from any state.
    fn max_degree(&self) -> usize {
        (0..self.num_links())
            .map(|i| self.local_rates(i).len() - 1)
            .sum()
    }
}

/// Breadth-first enumeration of every state reachable from the all-idle
/// state, returned in lexicographic order.
pub(crate) fn reachable_states<M: LinkStateModel + ?Sized>(
    model: &M,
    limit: usize,
) -> Option<Vec<LocalState>> {
    let n = model.num_links();
    let start: LocalState = vec![0; n];
    let mut seen: HashSet<LocalState> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back(start);
    let mut scratch = vec![0u32; n];
    while let Some(state) = queue.pop_front() {
        for link in 0..n {
            let k = model.local_rates(link).len() as u32;
            for cand in 0..k {
                if cand == state[link] || !model.admits(&state, link, cand) {
                    continue;
                }
                scratch.copy_from_slice(&state);
                scratch[link] = cand;
                if !seen.contains(scratch.as_slice()) {
                    if seen.len() >= limit {
                        return None;
                    }
                    seen.insert(scratch.clone());
                    queue.push_back(scratch.clone());
                }
            }
        }
    }
    let mut states: Vec<LocalState> = seen.into_iter().collect();
    states.sort();
    Some(states)
}
