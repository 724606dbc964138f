//! Bhattacharyya coefficients and distances.
//!
//! The coefficient ρ(p, q) = ∫ √(p q) lies in [0, 1]; the distance is
//! D = −ln ρ, so disjoint supports give ρ = 0 and D = +∞.

mod truncated;

pub use truncated::{
    bc_distance_truncated_mvn, bc_distance_truncated_normal_1d, OverlapConvention, TruncatedDistance,
    TruncatedGaussian, DEFAULT_MC_SAMPLES,
};

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::mixture::DensityGrid;
use crate::stats::{log_det_psd, symmetrize, GaussianModel};

/// Slack allowed on coefficients that should lie in [0, 1].
pub const COEFFICIENT_TOL: f64 = 1e-12;
/// Eigenvalue floor for the log-determinants in [`bc_distance_mvn`],
/// relative to the mean variance of the averaged covariance.
pub const MVN_EIGEN_FLOOR_REL: f64 = 1e-12;

/// Probabilities over `k` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Σ √(pᵢ qᵢ).
pub fn bc_coefficient_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::DimensionMismatch(p.probs.len(), q.probs.len()));
    }
    let rho: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(rho.min(1.0))
}

/// −ln ρ, with ρ = 0 mapped to +∞.
pub fn distance_from_coefficient(rho: f64) -> Result<f64> {
    if !(rho >= -COEFFICIENT_TOL && rho <= 1.0 + COEFFICIENT_TOL) {
        return Err(Error::CoefficientOutOfRange(rho));
    }
    let rho = rho.clamp(0.0, 1.0);
    if rho == 0.0 {
        return Ok(f64::INFINITY);
    }
    // −ln(1) is −0.0
    Ok((-rho.ln()).max(0.0))
}

/// Closed form for two univariate normals given as `(mean, variance)`.
pub fn bc_distance_normal_1d(p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    let ((mp, vp), (mq, vq)) = (p, q);
    for v in [vp, vq] {
        if !(v > 0.0) {
            return Err(Error::NonpositiveVariance(v));
        }
    }
    let shape = 0.25 * (0.25 * (vp / vq + vq / vp + 2.0)).ln();
    let location = 0.25 * (mp - mq).powi(2) / (vp + vq);
    Ok((shape + location).max(0.0))
}

/// Closed form for two multivariate normals.
///
/// With Σ = (Σ₁ + Σ₂)/2 this is ⅛ΔᵀΣ⁻¹Δ + ½[ln|Σ| − ½ln|Σ₁| − ½ln|Σ₂|]. The
/// quadratic form goes through a Cholesky solve and each log-determinant
/// through [`log_det_psd`], floored at `MVN_EIGEN_FLOOR_REL · trace(Σ)/m`.
pub fn bc_distance_mvn(p: &GaussianModel, q: &GaussianModel) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    let m = p.dim();
    let avg = symmetrize(&((&p.cov + &q.cov) * 0.5));
    let chol = Cholesky::new(avg.clone()).ok_or(Error::SingularAverageCovariance)?;
    let diff = &p.mean - &q.mean;
    let quad = diff.dot(&chol.solve(&diff));

    let scale = avg.trace() / m as f64;
    if !(scale > 0.0) {
        return Err(Error::SingularAverageCovariance);
    }
    let floor = MVN_EIGEN_FLOOR_REL * scale;
    let log_ratio = log_det_psd(&avg, floor)? - 0.5 * log_det_psd(&p.cov, floor)? - 0.5 * log_det_psd(&q.cov, floor)?;
    Ok((0.125 * quad + 0.5 * log_ratio).max(0.0))
}

/// Trapezoidal ∫ √(f g) on a shared grid.
pub fn bc_coefficient_grid(f: &DensityGrid, g: &DensityGrid) -> Result<f64> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    let integrand: Vec<f64> = f.values().iter().zip(g.values()).map(|(a, b)| (a * b).sqrt()).collect();
    Ok(trapezoid(&integrand, f.step()).clamp(0.0, 1.0))
}

/// ∫ (p₁ ⋯ p_M)^{1/M} for `M ≥ 2` densities on a shared grid.
pub fn bc_coefficient_multi(populations: &[DensityGrid]) -> Result<f64> {
    let count = populations.len();
    if count < 2 {
        return Err(Error::TooFewPopulations(count));
    }
    let first = &populations[0];
    if populations[1..].iter().any(|g| !first.same_grid(g)) {
        return Err(Error::GridMismatch);
    }
    let inv = 1.0 / count as f64;
    let integrand: Vec<f64> = (0..first.len())
        .map(|i| {
            let prod: f64 = populations.iter().map(|g| g.values()[i]).product();
            if count == 2 {
                prod.sqrt()
            } else {
                prod.powf(inv)
            }
        })
        .collect();
    Ok(trapezoid(&integrand, first.step()).clamp(0.0, 1.0))
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, .., last] => step * (values.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}
