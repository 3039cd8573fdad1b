//! Multi-band multi-radio scheduling.
//!
//! Each link holds a subset of bands (a bitmask). A link may not share a
//! band with a neighbour in that band's interference graph, and every node
//! has a radio budget shared by all links it terminates.

use serde::{Deserialize, Serialize};

use crate::chain::AllocationChain;
use crate::error::{Error, Result};
use crate::model::LinkStateModel;

pub const MAX_BANDS: usize = 16;

/// Schedules above this count are refused for exact chain construction.
pub const WHITESPACE_STATE_LIMIT: usize = 1 << 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhitespaceNetwork {
    pub nodes: usize,
    /// `[source, destination]` per link.
    pub links: Vec<[usize; 2]>,
    /// `B_b` per band.
    pub bandwidths: Vec<f64>,
    /// `c_{i,b}`, indexed `[link][band]`.
    pub efficiency: Vec<Vec<f64>>,
    /// Interfering link pairs per band, unordered.
    pub interference: Vec<Vec<[usize; 2]>>,
    /// Radio budget `a_j` per node.
    pub radios: Vec<u32>,
}

/// Band bitmask per link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BandSchedule {
    pub masks: Vec<u32>,
}

impl BandSchedule {
    pub fn empty(links: usize) -> Self {
        BandSchedule {
            masks: vec![0; links],
        }
    }

    /// From a link × band 0/1 matrix.
    pub fn from_matrix(sigma: &[Vec<bool>]) -> Self {
        BandSchedule {
            masks: sigma
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .fold(0, |m, (b, &on)| if on { m | 1 << b } else { m })
                })
                .collect(),
        }
    }

    pub fn is_on(&self, link: usize, band: usize) -> bool {
        self.masks[link] >> band & 1 == 1
    }
}

impl WhitespaceNetwork {
    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn num_bands(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidNetwork(m));
        let (n, m) = (self.num_links(), self.num_bands());
        if n == 0 {
            return bad("no links".into());
        }
        if m == 0 || m > MAX_BANDS {
            return bad(format!("band count must be in 1..={MAX_BANDS}, got {m}"));
        }
        if self.radios.len() != self.nodes {
            return bad(format!("{} radio budgets for {} nodes", self.radios.len(), self.nodes));
        }
        if let Some(j) = self.radios.iter().position(|&a| a < 1) {
            return bad(format!("node {j} has no radio"));
        }
        for (i, &[s, d]) in self.links.iter().enumerate() {
            if s >= self.nodes || d >= self.nodes || s == d {
                return bad(format!("link {i} has invalid endpoints [{s}, {d}]"));
            }
        }
        if let Some(b) = self.bandwidths.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return bad(format!("bandwidth of band {b} must be positive"));
        }
        if self.efficiency.len() != n || self.efficiency.iter().any(|row| row.len() != m) {
            return bad(format!("efficiency table must be {n} x {m}"));
        }
        if self.efficiency.iter().flatten().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return bad("efficiencies must be finite and nonnegative".into());
        }
        if self.interference.len() != m {
            return bad(format!("{} interference lists for {m} bands", self.interference.len()));
        }
        for (b, edges) in self.interference.iter().enumerate() {
            for &[u, v] in edges {
                if u >= n || v >= n || u == v {
                    return bad(format!("band {b}: invalid interference pair [{u}, {v}]"));
                }
            }
        }
        Ok(())
    }

    /// `min(a_s, a_d)`: the most bands link `i` can hold.
    pub fn band_cap(&self, link: usize) -> u32 {
        let [s, d] = self.links[link];
        self.radios[s].min(self.radios[d])
    }

    fn mask_rate(&self, link: usize, mask: u32) -> f64 {
        (0..self.num_bands())
            .filter(|b| mask >> b & 1 == 1)
            .fold(0.0, |acc, b| acc + self.efficiency[link][b] * self.bandwidths[b])
    }
}

/// `r_i = Σ_b σ_{i,b} c_{i,b} B_b`.
pub fn link_rate(net: &WhitespaceNetwork, schedule: &BandSchedule, link: usize) -> f64 {
    net.mask_rate(link, schedule.masks[link])
}

/// Interference, radio and per-link band constraints.
pub fn is_feasible_schedule(net: &WhitespaceNetwork, schedule: &BandSchedule) -> Result<bool> {
    let n = net.num_links();
    if schedule.masks.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: schedule.masks.len(),
        });
    }
    let full = (1u32 << net.num_bands()) - 1;
    if schedule.masks.iter().any(|&m| m & !full != 0) {
        return Ok(false);
    }
    for (b, edges) in net.interference.iter().enumerate() {
        if edges
            .iter()
            .any(|&[u, v]| schedule.is_on(u, b) && schedule.is_on(v, b))
        {
            return Ok(false);
        }
    }
    let mut used = vec![0u32; net.nodes];
    for (i, &[s, d]) in net.links.iter().enumerate() {
        let k = schedule.masks[i].count_ones();
        if k > net.band_cap(i) {
            return Ok(false);
        }
        used[s] += k;
        used[d] += k;
    }
    Ok(used.iter().zip(&net.radios).all(|(u, a)| u <= a))
}

/// The network as a local-state model: link `i`'s candidates are the band
/// subsets with at most `min(a_s, a_d)` bands, empty set first.
#[derive(Debug, Clone)]
pub struct WhitespaceModel {
    net: WhitespaceNetwork,
    candidates: Vec<Vec<u32>>,
    rates: Vec<Vec<f64>>,
    // neighbours[b][i]: links interfering with i on band b.
    neighbours: Vec<Vec<Vec<usize>>>,
    // Links terminating at each node.
    incident: Vec<Vec<usize>>,
}

impl WhitespaceModel {
    pub fn new(net: &WhitespaceNetwork) -> Result<Self> {
        net.validate()?;
        let (n, m) = (net.num_links(), net.num_bands());
        let candidates: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let cap = net.band_cap(i);
                let mut c: Vec<u32> = (0..1u32 << m).filter(|x| x.count_ones() <= cap).collect();
                c.sort_by_key(|x| (x.count_ones(), *x));
                c
            })
            .collect();
        let rates = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| c.iter().map(|&mask| net.mask_rate(i, mask)).collect())
            .collect();
        let mut neighbours = vec![vec![Vec::new(); n]; m];
        for (b, edges) in net.interference.iter().enumerate() {
            for &[u, v] in edges {
                if !neighbours[b][u].contains(&v) {
                    neighbours[b][u].push(v);
                    neighbours[b][v].push(u);
                }
            }
        }
        let mut incident = vec![Vec::new(); net.nodes];
        for (i, &[s, d]) in net.links.iter().enumerate() {
            incident[s].push(i);
            incident[d].push(i);
        }
        Ok(WhitespaceModel {
            net: net.clone(),
            candidates,
            rates,
            neighbours,
            incident,
        })
    }

    pub fn network(&self) -> &WhitespaceNetwork {
        &self.net
    }

    /// Band mask of `link`'s candidate.
    pub fn mask(&self, link: usize, candidate: u32) -> u32 {
        self.candidates[link][candidate as usize]
    }

    pub fn candidate_of(&self, link: usize, mask: u32) -> Option<u32> {
        self.candidates[link]
            .iter()
            .position(|&c| c == mask)
            .map(|k| k as u32)
    }

    pub fn schedule(&self, state: &[u32]) -> BandSchedule {
        BandSchedule {
            masks: state
                .iter()
                .enumerate()
                .map(|(i, &c)| self.mask(i, c))
                .collect(),
        }
    }
}

impl LinkStateModel for WhitespaceModel {
    fn num_links(&self) -> usize {
        self.net.num_links()
    }

    fn local_rates(&self, link: usize) -> &[f64] {
        &self.rates[link]
    }

    fn candidate_label(&self, link: usize, candidate: u32) -> u64 {
        self.mask(link, candidate) as u64
    }

    // Only the proposing link's neighbourhood and endpoints are consulted.
    fn admits(&self, state: &[u32], link: usize, candidate: u32) -> bool {
        let mask = self.mask(link, candidate);
        let mut bits = mask;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if self.neighbours[b][link]
                .iter()
                .any(|&u| self.mask(u, state[u]) >> b & 1 == 1)
            {
                return false;
            }
        }
        let k = mask.count_ones();
        self.net.links[link].iter().all(|&j| {
            let others: u32 = self.incident[j]
                .iter()
                .filter(|&&u| u != link)
                .map(|&u| self.mask(u, state[u]).count_ones())
                .sum();
            others + k <= self.net.radios[j]
        })
    }
}

/// Allocation chain over the feasible schedules of `net`.
pub fn whitespace_chain(net: &WhitespaceNetwork, v: &[f64]) -> Result<(WhitespaceModel, AllocationChain)> {
    let model = WhitespaceModel::new(net)?;
    let chain = AllocationChain::from_model(&model, v, WHITESPACE_STATE_LIMIT)?;
    Ok((model, chain))
}
