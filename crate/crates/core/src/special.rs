//! Standard normal density and distribution function.
//!
//! The CDF goes through `erfc`, which keeps full relative precision deep in
//! the lower tail. Interval masses are evaluated on whichever side of the
//! mean avoids cancellation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Density of N(mean, var) at `x`.
pub fn normal_density(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * PI * var).sqrt()
}

pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Φ(hi) − Φ(lo) for standardized bounds `lo < hi`.
pub fn norm_interval(lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    if lo > 0.0 {
        // both in the upper tail: Φ(hi) − Φ(lo) = Φ(−lo) − Φ(−hi)
        norm_cdf(-lo) - norm_cdf(-hi)
    } else {
        norm_cdf(hi) - norm_cdf(lo)
    }
}
