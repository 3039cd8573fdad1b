//! Fixtures shared by the benchmarks under `benches/`.

use ratealloc::{discretize, RateLevelGrid, RateRegion};

/// Two-user Gaussian MAC with levels {0, 0.4, 1}.
pub fn mac() -> RateLevelGrid {
    let lv = vec![vec![0.0, 0.4, 1.0]; 2];
    discretize(&RateRegion::gaussian_mac(3.0, 1.0, 2), 0.0, Some(&lv)).unwrap()
}

/// `n`-link simplex `Σ r_i <= 1` at resolution `eps`.
pub fn simplex(n: usize, eps: f64) -> RateLevelGrid {
    let r = RateRegion::Polytope {
        a: vec![vec![1.0; n]],
        b: vec![1.0],
    };
    discretize(&r, eps, None).unwrap()
}
