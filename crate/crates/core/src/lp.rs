//! Small linear programs over the convex hull of a finite point set.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Points above this count are not handed to the LP.
pub const LP_POINT_LIMIT: usize = 4096;

/// Largest `δ` with `target + δ·1 <= Σ_k μ_k p_k` for some probability
/// vector `μ`. Positive means `target` is strictly dominated by a point of
/// the hull; nonnegative means it lies in the hull's downward closure.
pub fn hull_slack(points: &[Vec<f64>], target: &[f64]) -> Result<f64> {
    scaled_dominance(points, target, |_| 1.0, true)
}

/// Largest `θ >= 0` with `θ·direction <= Σ_k μ_k p_k` for some probability
/// vector `μ`.
pub fn max_scaling(points: &[Vec<f64>], direction: &[f64]) -> Result<f64> {
    let zero = vec![0.0; direction.len()];
    scaled_dominance(points, &zero, |i| direction[i], false)
}

fn scaled_dominance(
    points: &[Vec<f64>],
    target: &[f64],
    weight: impl Fn(usize) -> f64,
    free_sign: bool,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Lp("no points".into()));
    }
    if points.len() > LP_POINT_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states: points.len(),
            limit: LP_POINT_LIMIT,
        });
    }
    let n = target.len();
    if let Some(p) = points.iter().find(|p| p.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.len(),
        });
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let lower = if free_sign { f64::NEG_INFINITY } else { 0.0 };
    let delta = lp.add_var(1.0, (lower, f64::INFINITY));
    let mu: Vec<_> = points.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();

    let mut total = LinearExpr::empty();
    for &m in &mu {
        total.add(m, 1.0);
    }
    lp.add_constraint(total, ComparisonOp::Eq, 1.0);

    for i in 0..n {
        // Σ μ_k p_k[i] - w_i δ >= target[i]
        let mut expr = LinearExpr::empty();
        for (p, &m) in points.iter().zip(&mu) {
            if p[i] != 0.0 {
                expr.add(m, p[i]);
            }
        }
        expr.add(delta, -weight(i));
        lp.add_constraint(expr, ComparisonOp::Ge, target[i]);
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    Ok(*sol.var_value(delta))
}
