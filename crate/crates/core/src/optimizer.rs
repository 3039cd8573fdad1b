//! The concave program `max_v λ·v - log Σ_r exp(r·v)` whose maximizer
//! `v*` makes the offered service rate equal the (shifted) arrival rate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{AllocationChain, EXACT_STATE_LIMIT};
use crate::error::{Error, Result};
use crate::grid::RateLevelGrid;
use crate::lp::{hull_slack, LP_POINT_LIMIT};

/// Objective, gradient and Hessian of the log-partition program.
#[derive(Debug, Clone)]
pub struct ProgramSpec {
    rates: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    shift: f64,
    epsilon: Option<f64>,
    k_hi: f64,
    k_lo: f64,
}

/// Solver settings.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop when `‖∇F‖_∞ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Use Newton directions from the exact Hessian (up to
    /// [`EXACT_STATE_LIMIT`] states); plain gradient ascent otherwise.
    pub newton: bool,
    /// Starting point, zero if absent.
    pub start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 10_000,
            newton: true,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub v_star: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub s_at_vstar: Vec<f64>,
    /// `‖v*‖_∞` against the shifted-program bound; absent when no `ε` was
    /// given or `ε > 4 λ_min`.
    pub bound_check: Option<bool>,
    pub bound: Option<f64>,
    /// Whether the target lies strictly inside the hull of the rate
    /// vectors; absent when the instance is too large for the LP.
    pub interior: Option<bool>,
    /// Objective at the start and after every accepted step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl ProgramSpec {
    /// Unshifted program for arrival rates `lambda`.
    pub fn new(grid: &RateLevelGrid, lambda: &[f64]) -> Result<Self> {
        Self::build(grid.vectors().to_vec(), lambda, 0.0, None, grid.k_hi(), grid.k_lo())
    }

    /// Program with target `λ + (ε/4)·1`.
    pub fn shifted(grid: &RateLevelGrid, lambda: &[f64], epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        Self::build(
            grid.vectors().to_vec(),
            lambda,
            epsilon / 4.0,
            Some(epsilon),
            grid.k_hi(),
            grid.k_lo(),
        )
    }

    /// Program over the states of an arbitrary allocation chain.
    pub fn from_chain(chain: &AllocationChain, lambda: &[f64], shift: f64) -> Result<Self> {
        let rates = chain.rate_vectors().to_vec();
        let n = chain.num_links();
        let k_lo = (0..n)
            .map(|i| rates.iter().map(|r| r[i]).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        Self::build(rates, lambda, shift, None, chain.max_rate(), k_lo)
    }

    fn build(
        rates: Vec<Vec<f64>>,
        lambda: &[f64],
        shift: f64,
        epsilon: Option<f64>,
        k_hi: f64,
        k_lo: f64,
    ) -> Result<Self> {
        let n = rates.first().map_or(0, Vec::len);
        if lambda.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: lambda.len(),
            });
        }
        if lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config("arrival rates must be positive".into()));
        }
        if !(shift >= 0.0) {
            return Err(Error::Config("shift must be nonnegative".into()));
        }
        Ok(ProgramSpec {
            rates,
            lambda: lambda.to_vec(),
            shift,
            epsilon,
            k_hi,
            k_lo,
        })
    }

    pub fn num_links(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `λ + shift·1`.
    pub fn target(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l + self.shift).collect()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_links() {
            return Err(Error::DimensionMismatch {
                expected: self.num_links(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn log_weights(&self, v: &[f64]) -> Vec<f64> {
        self.rates
            .iter()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn probabilities(&self, v: &[f64]) -> Vec<f64> {
        let w = self.log_weights(v);
        let z = log_sum_exp(&w);
        w.iter().map(|x| (x - z).exp()).collect()
    }

    /// `(λ+shift)·v - log Z(v)`.
    pub fn objective(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        let lin: f64 = self.target().iter().zip(v).map(|(a, b)| a * b).sum();
        Ok(lin - log_sum_exp(&self.log_weights(v)))
    }

    /// Offered service rate `s_v`.
    pub fn service(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        let p = self.probabilities(v);
        let mut s = vec![0.0; self.num_links()];
        for (pk, r) in p.iter().zip(&self.rates) {
            for (acc, x) in s.iter_mut().zip(r) {
                *acc += pk * x;
            }
        }
        Ok(s)
    }

    /// `∇F(v) = (λ+shift) - s_v`.
    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        let s = self.service(v)?;
        Ok(self.target().iter().zip(&s).map(|(t, s)| t - s).collect())
    }

    /// `H(v) = -(E[r rᵀ] - E[r] E[r]ᵀ)` under `π_v`.
    pub fn hessian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(v)?;
        let n = self.num_links();
        let p = self.probabilities(v);
        let s = self.service(v)?;
        let mut cov = DMatrix::zeros(n, n);
        for (pk, r) in p.iter().zip(&self.rates) {
            for i in 0..n {
                let di = r[i] - s[i];
                for j in 0..n {
                    cov[(i, j)] += pk * di * (r[j] - s[j]);
                }
            }
        }
        Ok(-cov)
    }

    /// `(16K̄/K_lo)(n/ε) log⌈2K̄/ε⌉`, applicable when `ε <= 4 λ_min`.
    pub fn vstar_bound(&self) -> Option<f64> {
        let eps = self.epsilon?;
        let lambda_min = self.lambda.iter().copied().fold(f64::INFINITY, f64::min);
        if eps > 4.0 * lambda_min {
            return None;
        }
        let n = self.num_links() as f64;
        Some(16.0 * self.k_hi / self.k_lo * n / eps * (2.0 * self.k_hi / eps).ceil().ln())
    }

    /// Whether `λ + shift` lies strictly inside the hull of the rate
    /// vectors; `None` above the LP size limit.
    pub fn interior(&self) -> Option<bool> {
        if self.rates.len() > LP_POINT_LIMIT {
            return None;
        }
        hull_slack(&self.rates, &self.target()).ok().map(|s| s > 1e-9)
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, y| m.max(y.abs()))
}

/// Maximizes the program by Armijo-backtracked ascent from `v = 0` (or the
/// given start), with Newton directions when enabled.
pub fn solve_vstar(spec: &ProgramSpec, opts: &SolveOptions) -> Result<SolveReport> {
    let n = spec.num_links();
    let mut v = match &opts.start {
        Some(s) => {
            spec.check_dim(s)?;
            s.clone()
        }
        None => vec![0.0; n],
    };
    let newton = opts.newton && spec.rates.len() <= EXACT_STATE_LIMIT;
    let mut f = spec.objective(&v)?;
    let mut grad = spec.gradient(&v)?;
    let mut iterations = 0;
    let mut step_hint = 1.0;
    let mut history = vec![f];

    while inf_norm(&grad) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: inf_norm(&grad),
                last: v,
            });
        }
        iterations += 1;

        let g = DVector::from_column_slice(&grad);
        let dir = if newton {
            let cov = -spec.hessian(&v)?;
            cov.cholesky().map(|ch| ch.solve(&g)).unwrap_or_else(|| g.clone())
        } else {
            g.clone()
        };
        let slope = g.dot(&dir);

        let mut t = if newton { 1.0 } else { step_hint };
        let mut accepted = false;
        while t > 1e-30 {
            let trial: Vec<f64> = v.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            let ft = spec.objective(&trial)?;
            if ft >= f + 1e-4 * t * slope {
                v = trial;
                f = ft;
                history.push(f);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent possible at machine precision.
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: inf_norm(&grad),
                last: v,
            });
        }
        step_hint = (t * 2.0).min(1e6);
        grad = spec.gradient(&v)?;
    }

    let bound = spec.vstar_bound();
    Ok(SolveReport {
        objective: f,
        grad_norm: inf_norm(&grad),
        iterations,
        s_at_vstar: spec.service(&v)?,
        bound_check: bound.map(|b| inf_norm(&v) <= b),
        bound,
        interior: spec.interior(),
        v_star: v,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::discretize;
    use crate::region::RateRegion;

    fn mac_grid() -> RateLevelGrid {
        let lv = vec![vec![0.0, 0.4, 1.0], vec![0.0, 0.4, 1.0]];
        discretize(&RateRegion::gaussian_mac(3.0, 1.0, 2), 0.0, Some(&lv)).unwrap()
    }

    fn two_level(c: f64) -> RateLevelGrid {
        discretize(&RateRegion::boxed(&[c]), 0.0, Some(&[vec![0.0, c]])).unwrap()
    }

    #[test]
    fn objective_at_zero_is_minus_log_count() {
        let spec = ProgramSpec::new(&mac_grid(), &[0.3, 0.5]).unwrap();
        assert!((spec.objective(&[0.0, 0.0]).unwrap() + 8f64.ln()).abs() < 1e-15);
        let spec = ProgramSpec::new(&two_level(2.0), &[1.0]).unwrap();
        assert!((spec.objective(&[0.0]).unwrap() + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_direct_summation() {
        let spec = ProgramSpec::new(&mac_grid(), &[0.3, 0.5]).unwrap();
        let v = [1.7, -0.4];
        let z: f64 = mac_grid()
            .vectors()
            .iter()
            .map(|r| (r[0] * v[0] + r[1] * v[1]).exp())
            .sum();
        let direct = 0.3 * v[0] + 0.5 * v[1] - z.ln();
        assert!((spec.objective(&v).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_zero_for_mean_rate() {
        let spec = ProgramSpec::new(&mac_grid(), &[0.4, 0.4]).unwrap();
        let g = spec.gradient(&[0.0, 0.0]).unwrap();
        assert!(inf_norm(&g) < 1e-15);
        let r = solve_vstar(&spec, &SolveOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.v_star, vec![0.0, 0.0]);
    }

    #[test]
    fn two_state_logistic_closed_form() {
        let c = 2.0;
        let spec = ProgramSpec::new(&two_level(c), &[c / 4.0]).unwrap();
        let r = solve_vstar(&spec, &SolveOptions::default()).unwrap();
        let expected = (1.0f64 / 3.0).ln() / c;
        assert!((r.v_star[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn symmetric_target_gives_symmetric_solution() {
        let spec = ProgramSpec::new(&mac_grid(), &[0.6, 0.6]).unwrap();
        let r = solve_vstar(&spec, &SolveOptions::default()).unwrap();
        assert!((r.v_star[0] - r.v_star[1]).abs() < 1e-9);
        assert!(inf_norm(&[r.s_at_vstar[0] - 0.6, r.s_at_vstar[1] - 0.6]) <= 1e-8);
        assert_eq!(r.interior, Some(true));
    }

    #[test]
    fn gradient_ascent_without_newton_converges() {
        let spec = ProgramSpec::new(&mac_grid(), &[0.6, 0.5]).unwrap();
        let opts = SolveOptions {
            newton: false,
            tol: 1e-7,
            max_iter: 200_000,
            ..Default::default()
        };
        let r = solve_vstar(&spec, &opts).unwrap();
        let newton = solve_vstar(&spec, &SolveOptions::default()).unwrap();
        assert!(inf_norm(&[r.v_star[0] - newton.v_star[0], r.v_star[1] - newton.v_star[1]]) < 1e-5);
    }

    #[test]
    fn target_outside_the_hull_does_not_converge() {
        // Sum 1.54 exceeds the best sum rate 1.4; the objective is unbounded.
        let spec = ProgramSpec::new(&mac_grid(), &[0.77, 0.77]).unwrap();
        let opts = SolveOptions {
            max_iter: 60,
            ..Default::default()
        };
        match solve_vstar(&spec, &opts) {
            Err(Error::NonConvergence { last, .. }) => assert_eq!(last.len(), 2),
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert_eq!(spec.interior(), Some(false));
    }

    #[test]
    fn frontier_target_is_flagged_but_reaches_tolerance() {
        // On the frontier the gradient decays exponentially in ‖v‖, so the
        // tolerance is met at a large finite v; the report flags it.
        let spec = ProgramSpec::new(&mac_grid(), &[0.7, 0.7]).unwrap();
        let r = solve_vstar(&spec, &SolveOptions::default()).unwrap();
        assert_eq!(r.interior, Some(false));
        assert!(r.v_star[0] > 20.0);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        assert!(ProgramSpec::new(&mac_grid(), &[0.0, 0.3]).is_err());
        assert!(matches!(
            ProgramSpec::new(&mac_grid(), &[0.3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
