//! Monte Carlo check of the identity linking the covariance of a transformed
//! variable to the Bhattacharyya coefficient of the two marginals:
//!
//! `Cov[c(X), Y] = Cov(X, Y) − E[√(f_Y(X)/f_X(X)) Y] + μ_Y ρ(f_X, f_Y)`
//! with `c(t) = t − √(f_Y(t)/f_X(t))`.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mixture::{tabulate_density, DensityGrid};
use crate::rng::{stream, StreamRng};
use crate::special::normal_density;

pub const MIN_MC_SAMPLES: usize = 10_000;
/// Composite Simpson intervals used for marginal masses and ρ.
pub const SIMPSON_INTERVALS: usize = 40_000;
pub const MARGINAL_MASS_TOL: f64 = 1e-6;

pub type Sampler = Arc<dyn Fn(&mut StreamRng) -> (f64, f64) + Send + Sync>;
pub type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A joint law for `(X, Y)` given by a seeded sampler together with its
/// marginal densities and `E[Y]`. Both marginals are integrated over
/// `[support_lo, support_hi]`.
#[derive(Clone)]
pub struct BivariateSampleModel {
    sampler: Sampler,
    marginal_x: Density,
    marginal_y: Density,
    mean_y: f64,
    support_lo: f64,
    support_hi: f64,
}

impl fmt::Debug for BivariateSampleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BivariateSampleModel")
            .field("mean_y", &self.mean_y)
            .field("support", &(self.support_lo, self.support_hi))
            .finish_non_exhaustive()
    }
}

impl BivariateSampleModel {
    /// Both marginals must integrate to one over the support. A degenerate
    /// `Y` can be modelled by passing `f_X` as its stand-in density.
    pub fn new(
        sampler: Sampler,
        marginal_x: Density,
        marginal_y: Density,
        mean_y: f64,
        support: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("support [{lo}, {hi}] is not a finite interval")));
        }
        if !mean_y.is_finite() {
            return Err(Error::invalid("mean_y must be finite"));
        }
        let model = Self { sampler, marginal_x, marginal_y, mean_y, support_lo: lo, support_hi: hi };
        for (name, f) in [("f_X", &model.marginal_x), ("f_Y", &model.marginal_y)] {
            let mass = simpson(|t| f(t), lo, hi, SIMPSON_INTERVALS);
            if (mass - 1.0).abs() > MARGINAL_MASS_TOL {
                return Err(Error::invalid(format!("{name} integrates to {mass} on the support")));
            }
        }
        Ok(model)
    }

    /// Bivariate normal with the given means, standard deviations and
    /// correlation. The support spans 12 standard deviations each side.
    pub fn bivariate_normal(mean: (f64, f64), sd: (f64, f64), corr: f64) -> Result<Self> {
        let ((mx, my), (sx, sy)) = (mean, sd);
        if !(sx > 0.0 && sy > 0.0) {
            return Err(Error::NonpositiveVariance(sx.min(sy)));
        }
        if !(-1.0..=1.0).contains(&corr) {
            return Err(Error::invalid(format!("correlation {corr} outside [-1, 1]")));
        }
        let tail = (1.0 - corr * corr).sqrt();
        let sampler: Sampler = Arc::new(move |rng: &mut StreamRng| {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            (mx + sx * z1, my + sy * (corr * z1 + tail * z2))
        });
        let lo = (mx - 12.0 * sx).min(my - 12.0 * sy);
        let hi = (mx + 12.0 * sx).max(my + 12.0 * sy);
        Self::new(
            sampler,
            Arc::new(move |t| normal_density(t, mx, sx * sx)),
            Arc::new(move |t| normal_density(t, my, sy * sy)),
            my,
            (lo, hi),
        )
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn marginal_x(&self, t: f64) -> f64 {
        (self.marginal_x)(t)
    }

    pub fn marginal_y(&self, t: f64) -> f64 {
        (self.marginal_y)(t)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> (f64, f64) {
        (self.sampler)(rng)
    }

    fn sqrt_ratio(&self, t: f64) -> Result<f64> {
        let (fx, fy) = (self.marginal_x(t), self.marginal_y(t));
        if fx > 0.0 {
            Ok((fy / fx).sqrt())
        } else if fy > 0.0 {
            Err(Error::RatioUndefined(t))
        } else {
            Ok(0.0)
        }
    }

    /// ρ(f_X, f_Y) by composite Simpson over the support.
    pub fn coefficient(&self) -> Result<f64> {
        let (lo, hi) = self.support();
        let h = (hi - lo) / SIMPSON_INTERVALS as f64;
        for i in 0..=SIMPSON_INTERVALS {
            self.sqrt_ratio(lo + i as f64 * h)?;
        }
        Ok(simpson(|t| (self.marginal_x(t) * self.marginal_y(t)).sqrt(), lo, hi, SIMPSON_INTERVALS))
    }

    /// Both marginals tabulated on a shared grid, for use with the grid
    /// coefficient.
    pub fn marginal_grids(&self, step: f64) -> Result<(DensityGrid, DensityGrid)> {
        let (lo, hi) = self.support();
        Ok((tabulate_density(|t| self.marginal_x(t), lo, hi, step)?, tabulate_density(|t| self.marginal_y(t), lo, hi, step)?))
    }
}

/// `c(t) = t − √(f_Y(t)/f_X(t))`.
pub fn c_function(t: f64, model: &BivariateSampleModel) -> Result<f64> {
    let (fx, fy) = (model.marginal_x(t), model.marginal_y(t));
    if !(fx > 0.0) {
        return Err(Error::RatioUndefined(t));
    }
    Ok(t - (fy / fx).sqrt())
}

/// Terms of the identity as estimated from one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// Left side minus right side.
    pub residual: f64,
    pub std_error: f64,
    pub cov_cx_y: f64,
    pub cov_x_y: f64,
    /// `E[√(f_Y(X)/f_X(X)) Y]`.
    pub ratio_moment: f64,
    pub rho: f64,
    pub samples: usize,
}

/// Estimates both sides of the identity from `mc_samples` draws.
///
/// Covariances use divisor `n`, so the residual reduces to
/// `mean(r) · mean(y) − μ_Y ρ` with `r = √(f_Y(X)/f_X(X))`. The standard
/// error comes from the influence function of that estimator.
pub fn verify_covariance_identity(model: &BivariateSampleModel, mc_samples: usize, seed: u64) -> Result<IdentityReport> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::invalid(format!("mc_samples must be at least {MIN_MC_SAMPLES}, got {mc_samples}")));
    }
    let rho = model.coefficient()?;
    let mut rng = stream(seed);
    let n = mc_samples;
    let (mut xs, mut ys, mut rs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let (x, y) = model.sample(&mut rng);
        rs.push(model.sqrt_ratio(x)?);
        xs.push(x);
        ys.push(y);
    }
    let nf = n as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / nf;
    let (xb, yb, rb) = (mean(&xs), mean(&ys), mean(&rs));
    let cb = xb - rb;
    let mut cov_cy = 0.0;
    let mut cov_xy = 0.0;
    let mut ry = 0.0;
    for i in 0..n {
        let dy = ys[i] - yb;
        cov_cy += (xs[i] - rs[i] - cb) * dy;
        cov_xy += (xs[i] - xb) * dy;
        ry += rs[i] * ys[i];
    }
    let (cov_cy, cov_xy, ry) = (cov_cy / nf, cov_xy / nf, ry / nf);
    let residual = cov_cy - (cov_xy - ry + model.mean_y() * rho);

    let psi = |i: usize| yb * (rs[i] - rb) + rb * (ys[i] - yb);
    let var = (0..n).map(|i| psi(i).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(IdentityReport {
        residual,
        std_error: (var / nf).sqrt(),
        cov_cx_y: cov_cy,
        cov_x_y: cov_xy,
        ratio_moment: ry,
        rho,
        samples: n,
    })
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}
