//! Rate regions and their feasibility oracles.
//!
//! A region is the set of instantaneous link-rate vectors that can be
//! sustained simultaneously. Every region here is compact and downward
//! closed, so feasibility of a vector implies feasibility of anything
//! component-wise below it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used by every membership test.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Largest user count accepted for the multiple-access region.
pub const MAX_MAC_USERS: usize = 20;

/// Shannon capacity `0.5 * log2(1 + snr)` in bits per channel use.
pub fn gaussian_capacity(snr: f64) -> f64 {
    0.5 * (1.0 + snr).log2()
}

/// Simplified physical-layer model where rate depends on the distance to
/// the nearest other active transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceModel {
    /// Planar node positions.
    pub nodes: Vec<[f64; 2]>,
    /// Links as `[transmitter, receiver]` node indices.
    pub links: Vec<[usize; 2]>,
    /// A receiver must lie within this distance of its transmitter (`d_0`).
    pub receive_radius: f64,
    /// Clearance radii `d_1 <= ... <= d_k`.
    pub radii: Vec<f64>,
    /// Rates `r_1 <= ... <= r_k`; rate `r_j` needs no other active
    /// transmitter within `d_j`.
    pub rates: Vec<f64>,
}

impl DistanceModel {
    fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.nodes[a], self.nodes[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }

    /// Highest rate link `link` may use given which other links are active.
    fn allowed_rate(&self, link: usize, active: &[bool]) -> f64 {
        let tx = self.links[link][0];
        let nearest = self
            .links
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != link && active[j])
            .map(|(_, l)| self.distance(tx, l[0]))
            .fold(f64::INFINITY, f64::min);
        self.radii
            .iter()
            .zip(&self.rates)
            .filter(|&(&d, _)| nearest > d)
            .map(|(_, &r)| r)
            .fold(0.0, f64::max)
    }
}

/// A compact, downward-closed rate region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateRegion {
    /// Downward closure of an explicit list of maximal rate vectors.
    VectorSet { vectors: Vec<Vec<f64>> },
    /// `{c >= 0 : A c <= b}` with nonnegative `A` and `b`.
    Polytope { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// Equal-power Gaussian multiple-access channel with `links` users.
    GaussianMac { power: f64, noise: f64, links: usize },
    /// Channel-measuring distance model.
    DistanceThreshold(DistanceModel),
}

impl RateRegion {
    pub fn gaussian_mac(power: f64, noise: f64, links: usize) -> Self {
        RateRegion::GaussianMac {
            power,
            noise,
            links,
        }
    }

    /// Axis-aligned box `0 <= c <= max`.
    pub fn boxed(max: &[f64]) -> Self {
        let n = max.len();
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        RateRegion::Polytope {
            a,
            b: max.to_vec(),
        }
    }

    pub fn num_links(&self) -> usize {
        match self {
            RateRegion::VectorSet { vectors } => vectors.first().map_or(0, Vec::len),
            RateRegion::Polytope { a, .. } => a.first().map_or(0, Vec::len),
            RateRegion::GaussianMac { links, .. } => *links,
            RateRegion::DistanceThreshold(m) => m.links.len(),
        }
    }

    /// Checks the structural invariants: at least one link, nonnegative
    /// parameters, and `0 < c_i < inf` for every link.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRegion(msg));
        let n = self.num_links();
        if n == 0 {
            return bad("region has no links".into());
        }
        match self {
            RateRegion::VectorSet { vectors } => {
                for v in vectors {
                    if v.len() != n {
                        return bad(format!("vector {v:?} has dimension {} not {n}", v.len()));
                    }
                    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return bad(format!("vector {v:?} has a negative or non-finite entry"));
                    }
                }
            }
            RateRegion::Polytope { a, b } => {
                if a.len() != b.len() {
                    return bad(format!("{} rows in A but {} entries in b", a.len(), b.len()));
                }
                for row in a {
                    if row.len() != n {
                        return bad("ragged constraint matrix".into());
                    }
                    if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                        return bad("constraint matrix must be nonnegative".into());
                    }
                }
                if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return bad("right-hand side must be nonnegative".into());
                }
            }
            RateRegion::GaussianMac { power, noise, links } => {
                if !(*power > 0.0 && *noise > 0.0) {
                    return bad("MAC power and noise must be positive".into());
                }
                if *links > MAX_MAC_USERS {
                    return bad(format!("MAC supports at most {MAX_MAC_USERS} users"));
                }
            }
            RateRegion::DistanceThreshold(m) => {
                if m.radii.len() != m.rates.len() || m.rates.is_empty() {
                    return bad("distance model needs matching nonempty radii and rates".into());
                }
                if m.radii.windows(2).any(|w| w[0] > w[1])
                    || m.rates.windows(2).any(|w| w[0] > w[1])
                {
                    return bad("radii and rates must be nondecreasing".into());
                }
                if m.receive_radius > m.radii[0] {
                    return bad("receive radius d_0 must not exceed d_1".into());
                }
                for (i, l) in m.links.iter().enumerate() {
                    if l[0] >= m.nodes.len() || l[1] >= m.nodes.len() {
                        return bad(format!("link {i} references a missing node"));
                    }
                    if m.distance(l[0], l[1]) > m.receive_radius {
                        return bad(format!("link {i} receiver is beyond the receive radius"));
                    }
                }
            }
        }
        for i in 0..n {
            let c = self.per_link_max(i)?;
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("link {i} has maximum rate {c}; need 0 < c < inf"));
            }
        }
        Ok(())
    }

    /// Membership test `rates ∈ C` with absolute slack [`FEASIBILITY_TOL`].
    pub fn is_feasible(&self, rates: &[f64]) -> Result<bool> {
        let n = self.num_links();
        if rates.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rates.len(),
            });
        }
        if rates.iter().any(|&r| r < -FEASIBILITY_TOL || r.is_nan()) {
            return Ok(false);
        }
        let ok = match self {
            RateRegion::VectorSet { vectors } => vectors.iter().any(|v| {
                v.iter()
                    .zip(rates)
                    .all(|(&cap, &r)| r <= cap + FEASIBILITY_TOL)
            }),
            RateRegion::Polytope { a, b } => a.iter().zip(b).all(|(row, &rhs)| {
                let lhs: f64 = row.iter().zip(rates).map(|(x, r)| x * r).sum();
                lhs <= rhs + FEASIBILITY_TOL
            }),
            RateRegion::GaussianMac { power, noise, .. } => {
                // Every constraint depends on the subset only through its
                // size, so the k largest rates give the binding sum.
                let mut sorted = rates.to_vec();
                sorted.sort_by(|x, y| y.total_cmp(x));
                let mut partial = 0.0;
                sorted.iter().enumerate().all(|(k, &r)| {
                    partial += r;
                    partial <= gaussian_capacity((k + 1) as f64 * power / noise) + FEASIBILITY_TOL
                })
            }
            RateRegion::DistanceThreshold(m) => {
                let active: Vec<bool> = rates.iter().map(|&r| r > FEASIBILITY_TOL).collect();
                (0..n).all(|i| !active[i] || rates[i] <= m.allowed_rate(i, &active) + FEASIBILITY_TOL)
            }
        };
        Ok(ok)
    }

    /// Largest `α` with `α e_link` feasible.
    pub fn per_link_max(&self, link: usize) -> Result<f64> {
        let n = self.num_links();
        if link >= n {
            return Err(Error::InvalidLink { link, links: n });
        }
        Ok(match self {
            RateRegion::VectorSet { vectors } => {
                vectors.iter().map(|v| v[link]).fold(0.0, f64::max)
            }
            RateRegion::Polytope { a, b } => a
                .iter()
                .zip(b)
                .filter(|(row, _)| row[link] > 0.0)
                .map(|(row, rhs)| rhs / row[link])
                .fold(f64::INFINITY, f64::min),
            RateRegion::GaussianMac { power, noise, .. } => gaussian_capacity(power / noise),
            RateRegion::DistanceThreshold(m) => {
                let mut active = vec![false; n];
                active[link] = true;
                m.allowed_rate(link, &active)
            }
        })
    }

    /// Per-link maxima for every link.
    pub fn link_maxima(&self) -> Result<Vec<f64>> {
        (0..self.num_links()).map(|i| self.per_link_max(i)).collect()
    }
}
