//! The rate-allocation Markov chain over a finite set of admissible states.
//!
//! From any state a link may switch its local state; the clock attached to
//! the destination fires at rate `exp(r_i * v_i)` where `r_i` is the
//! destination's rate for the changed link. Only single-link changes have
//! positive rate. The stationary law is `π(r) ∝ exp(r · v)`.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::grid::RateLevelGrid;
use crate::model::{reachable_states, LinkStateModel, LocalState};

/// Largest chain for which dense matrices are built.
pub const EXACT_STATE_LIMIT: usize = 4096;

/// An outgoing single-link move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub to: usize,
    pub link: usize,
}

#[derive(Debug, Clone)]
pub struct AllocationChain {
    states: Vec<LocalState>,
    rates: Vec<Vec<f64>>,
    index: HashMap<LocalState, usize>,
    adjacency: Vec<Vec<Edge>>,
    v: Vec<f64>,
    max_rate: f64,
    max_degree: usize,
    cardinality_bound: f64,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl AllocationChain {
    /// Chain over the feasible vectors of a rate-level grid.
    pub fn new(grid: &RateLevelGrid, v: &[f64]) -> Result<Self> {
        let mut chain = Self::build(grid, grid.states().to_vec(), v)?;
        chain.cardinality_bound = grid.cardinality_bound();
        Ok(chain)
    }

    /// Chain over every state reachable from the all-idle state of `model`.
    pub fn from_model<M: LinkStateModel + ?Sized>(model: &M, v: &[f64], limit: usize) -> Result<Self> {
        let states = reachable_states(model, limit).ok_or(Error::StateSpaceTooLarge {
            states: limit + 1,
            limit,
        })?;
        let mut chain = Self::build(model, states, v)?;
        chain.cardinality_bound = chain.len() as f64;
        Ok(chain)
    }

    /// Chain over an explicit list of rate vectors; states differing in a
    /// single coordinate are neighbours.
    pub fn from_rate_vectors(vectors: &[Vec<f64>], v: &[f64]) -> Result<Self> {
        let model = ExplicitModel::new(vectors)?;
        let states: Vec<LocalState> = vectors.iter().map(|r| model.encode(r)).collect();
        let mut chain = Self::build(&model, states, v)?;
        chain.cardinality_bound = chain.len() as f64;
        Ok(chain)
    }

    /// Chain over an explicit list of states, given every link's candidate
    /// rates. Used to reload dumped chains.
    pub fn from_states(states: Vec<LocalState>, local_rates: Vec<Vec<f64>>, v: &[f64]) -> Result<Self> {
        let model = TableModel::new(&states, local_rates)?;
        let mut chain = Self::build(&model, states, v)?;
        chain.cardinality_bound = chain.len() as f64;
        Ok(chain)
    }

    fn build<M: LinkStateModel + ?Sized>(model: &M, states: Vec<LocalState>, v: &[f64]) -> Result<Self> {
        let n = model.num_links();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        let index: HashMap<LocalState, usize> = states
            .iter()
            .enumerate()
            .map(|(id, s)| (s.clone(), id))
            .collect();
        let mut adjacency = Vec::with_capacity(states.len());
        let mut key = vec![0u32; n];
        for s in &states {
            let mut edges = Vec::new();
            for link in 0..n {
                for cand in 0..model.local_rates(link).len() as u32 {
                    if cand == s[link] {
                        continue;
                    }
                    key.copy_from_slice(s);
                    key[link] = cand;
                    if let Some(&to) = index.get(key.as_slice()) {
                        edges.push(Edge { to, link });
                    }
                }
            }
            adjacency.push(edges);
        }
        let rates = states.iter().map(|s| model.rate_vector(s)).collect();
        Ok(AllocationChain {
            states,
            rates,
            index,
            adjacency,
            v: v.to_vec(),
            max_rate: model.max_rate(),
            max_degree: model.max_degree(),
            cardinality_bound: 0.0,
        })
    }

    /// Same state space with a different parameter vector.
    pub fn with_v(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.num_links() {
            return Err(Error::DimensionMismatch {
                expected: self.num_links(),
                got: v.len(),
            });
        }
        let mut c = self.clone();
        c.v = v.to_vec();
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn num_links(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_inf(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn states(&self) -> &[LocalState] {
        &self.states
    }

    pub fn rate_vectors(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn state_id(&self, state: &[u32]) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn neighbors(&self, id: usize) -> &[Edge] {
        &self.adjacency[id]
    }

    /// `K̄`, the largest single-link rate.
    pub fn max_rate(&self) -> f64 {
        self.max_rate
    }

    /// Upper bound on the out-degree of any state, `Σ_i (|candidates_i| - 1)`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// State-count bound entering the mixing and conductance estimates:
    /// `⌈2K̄/ε⌉^n` for grid chains, the exact count otherwise.
    pub fn cardinality_bound(&self) -> f64 {
        self.cardinality_bound
    }

    fn edge_rate(&self, to: usize, link: usize) -> f64 {
        (self.rates[to][link] * self.v[link]).exp()
    }

    /// Total outgoing rate of a state.
    pub fn exit_rate(&self, id: usize) -> f64 {
        self.adjacency[id]
            .iter()
            .map(|e| self.edge_rate(e.to, e.link))
            .sum()
    }

    /// Entry `q(from, to)` of the rate matrix. Off-diagonal entries are
    /// positive only for single-link changes; the diagonal holds the
    /// negative exit rate.
    pub fn transition_rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return -self.exit_rate(from);
        }
        self.adjacency[from]
            .iter()
            .find(|e| e.to == to)
            .map_or(0.0, |e| self.edge_rate(e.to, e.link))
    }

    /// `r · v` for every state.
    pub fn log_weights(&self) -> Vec<f64> {
        self.rates
            .iter()
            .map(|r| r.iter().zip(&self.v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `log Σ_r exp(r · v)`.
    pub fn log_partition(&self) -> f64 {
        log_sum_exp(&self.log_weights())
    }

    /// Closed-form stationary distribution `π_v(r) = exp(r·v) / Z(v)`,
    /// evaluated in the log domain.
    pub fn stationary(&self) -> Distribution {
        let w = self.log_weights();
        let log_z = log_sum_exp(&w);
        Distribution::from_weights(w.iter().map(|x| (x - log_z).exp()).collect())
    }

    /// Mean rate vector under the stationary distribution.
    pub fn offered_service(&self) -> Vec<f64> {
        self.expected_rate(&self.stationary())
    }

    /// Mean rate vector under an arbitrary distribution on the states.
    pub fn expected_rate(&self, dist: &Distribution) -> Vec<f64> {
        let mut s = vec![0.0; self.num_links()];
        for (p, r) in dist.probs().iter().zip(&self.rates) {
            for (acc, x) in s.iter_mut().zip(r) {
                *acc += p * x;
            }
        }
        s
    }

    fn gate(&self) -> Result<()> {
        if self.len() > EXACT_STATE_LIMIT {
            return Err(Error::StateSpaceTooLarge {
                states: self.len(),
                limit: EXACT_STATE_LIMIT,
            });
        }
        Ok(())
    }

    /// Dense generator matrix `Q`.
    pub fn rate_matrix(&self) -> Result<DMatrix<f64>> {
        self.gate()?;
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for from in 0..n {
            let mut out = 0.0;
            for e in &self.adjacency[from] {
                let rate = self.edge_rate(e.to, e.link);
                q[(from, e.to)] = rate;
                out += rate;
            }
            q[(from, from)] = -out;
        }
        Ok(q)
    }

    /// Uniformization constant `A = d·exp(K̄‖v‖_∞)` with `d` the largest
    /// possible out-degree, so every exit rate is at most `A`.
    pub fn uniformization_constant(&self) -> f64 {
        self.max_degree as f64 * (self.max_rate * self.v_inf()).exp()
    }

    /// Discrete-time chain `P = I + Q/A`.
    pub fn uniformize(&self) -> Result<Dtmc> {
        let a = self.uniformization_constant();
        let q = self.rate_matrix()?;
        let n = self.len();
        let p = DMatrix::identity(n, n) + q / a;
        Ok(Dtmc {
            p,
            uniformization: a,
        })
    }
}

/// A discrete-time chain given by a row-stochastic matrix.
#[derive(Debug, Clone)]
pub struct Dtmc {
    p: DMatrix<f64>,
    uniformization: f64,
}

impl Dtmc {
    /// Wraps a row-stochastic matrix (rows must sum to 1 within 1e-9).
    pub fn from_matrix(p: DMatrix<f64>) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::DimensionMismatch {
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
        for (i, row) in p.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("row {i} is not a probability vector")));
            }
        }
        Ok(Dtmc {
            p,
            uniformization: f64::NAN,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.nrows() == 0
    }

    /// The constant `A` used to build this chain, NaN if given directly.
    pub fn uniformization(&self) -> f64 {
        self.uniformization
    }

    /// Stationary distribution from the null space of `Pᵀ - I`.
    pub fn stationary(&self) -> Result<Distribution> {
        let n = self.len();
        crate::analysis::null_space_stationary(&(&self.p - DMatrix::identity(n, n)))
    }

    /// Distribution after `steps` transitions from `mu`.
    pub fn evolve(&self, mu: &Distribution, steps: u64) -> Distribution {
        let mut row = nalgebra::RowDVector::from_row_slice(mu.probs());
        for _ in 0..steps {
            row = &row * &self.p;
        }
        Distribution::from_weights(row.iter().copied().collect())
    }
}

/// Explicit state list; each link's candidates are the distinct values it
/// takes across the list.
struct ExplicitModel {
    values: Vec<Vec<f64>>,
    index: HashMap<LocalState, usize>,
}

impl ExplicitModel {
    fn new(vectors: &[Vec<f64>]) -> Result<Self> {
        let n = vectors.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::Config("empty state list".into()));
        }
        let mut values = vec![vec![0.0]; n];
        for r in vectors {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            for (vals, &x) in values.iter_mut().zip(r) {
                if !vals.contains(&x) {
                    vals.push(x);
                }
            }
        }
        for vals in &mut values {
            vals.sort_by(f64::total_cmp);
        }
        let mut model = ExplicitModel {
            values,
            index: HashMap::new(),
        };
        for (id, r) in vectors.iter().enumerate() {
            let s = model.encode(r);
            if model.index.insert(s, id).is_some() {
                return Err(Error::Config(format!("duplicate state {r:?}")));
            }
        }
        Ok(model)
    }

    fn encode(&self, r: &[f64]) -> LocalState {
        r.iter()
            .zip(&self.values)
            .map(|(x, vals)| vals.iter().position(|y| y == x).unwrap() as u32)
            .collect()
    }
}

impl LinkStateModel for ExplicitModel {
    fn num_links(&self) -> usize {
        self.values.len()
    }

    fn local_rates(&self, link: usize) -> &[f64] {
        &self.values[link]
    }

    fn admits(&self, state: &[u32], link: usize, candidate: u32) -> bool {
        let mut key = state.to_vec();
        key[link] = candidate;
        self.index.contains_key(&key)
    }
}

/// States listed explicitly over known candidate rates.
struct TableModel {
    rates: Vec<Vec<f64>>,
    index: HashSet<LocalState>,
}

impl TableModel {
    fn new(states: &[LocalState], rates: Vec<Vec<f64>>) -> Result<Self> {
        let n = rates.len();
        let mut index = HashSet::new();
        for s in states {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
            if s.iter().zip(&rates).any(|(&c, r)| c as usize >= r.len()) {
                return Err(Error::Config(format!("state {s:?} names an unknown candidate")));
            }
            if !index.insert(s.clone()) {
                return Err(Error::Config(format!("duplicate state {s:?}")));
            }
        }
        if states.is_empty() || n == 0 {
            return Err(Error::Config("empty state list".into()));
        }
        Ok(TableModel { rates, index })
    }
}

impl LinkStateModel for TableModel {
    fn num_links(&self) -> usize {
        self.rates.len()
    }

    fn local_rates(&self, link: usize) -> &[f64] {
        &self.rates[link]
    }

    fn admits(&self, state: &[u32], link: usize, candidate: u32) -> bool {
        let mut key = state.to_vec();
        key[link] = candidate;
        self.index.contains(&key)
    }
}
