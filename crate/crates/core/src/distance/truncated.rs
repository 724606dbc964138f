//! Distances between truncated normals and truncated multivariate normals.
//!
//! For p = N(μp, Σp) on [a, b] and q = N(μq, Σq) on [c, d] the geometric
//! mean of the untruncated densities is e^{−D_MN} · N(x; m, 2T) with
//! T = (Σp⁻¹ + Σq⁻¹)⁻¹ and m = T(Σp⁻¹μp + Σq⁻¹μq), so
//!
//! D = D_MN + ½ ln Zp + ½ ln Zq − ln P_{N(m, 2T)}[l ≤ x ≤ u]
//!
//! where Zp, Zq are the truncation masses. Box masses of diagonal Gaussians
//! are products of univariate Φ differences; the rest use Monte Carlo.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::{bc_distance_mvn, bc_distance_normal_1d};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::special::norm_interval;
use crate::stats::{is_diagonal, symmetrize, GaussianModel};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// A (multivariate) normal restricted to the box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    pub model: GaussianModel,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl TruncatedGaussian {
    pub fn new(model: GaussianModel, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let m = model.dim();
        if lower.len() != m || upper.len() != m {
            return Err(Error::DimensionMismatch(m, lower.len().min(upper.len())));
        }
        for i in 0..m {
            let (lo, hi) = (lower[i], upper[i]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY || !(lo < hi) {
                return Err(Error::invalid(format!("invalid truncation interval [{lo}, {hi}] in dimension {i}")));
            }
        }
        Ok(Self { model, lower, upper })
    }

    pub fn univariate(mean: f64, var: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::NonpositiveVariance(var));
        }
        Self::new(
            GaussianModel::diagonal(&[mean], &[var])?,
            DVector::from_element(1, lower),
            DVector::from_element(1, upper),
        )
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }
}

/// Which box the cross term is integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapConvention {
    /// `l = max(a, c)`, `u = min(b, d)`: the common support.
    #[default]
    Intersection,
    /// `l = min(a, c)`, `u = min(b, d)`.
    AsPrinted,
}

impl OverlapConvention {
    fn bounds(self, a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
        match self {
            OverlapConvention::Intersection => (a.max(c), b.min(d)),
            OverlapConvention::AsPrinted => (a.min(c), b.min(d)),
        }
    }
}

/// A distance together with its Monte Carlo standard error (zero on exact
/// paths).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedDistance {
    pub value: f64,
    pub std_error: f64,
}

impl TruncatedDistance {
    fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }
}

fn disjoint(a: f64, b: f64, c: f64, d: f64) -> bool {
    a.max(c) >= b.min(d)
}

fn checked_ln(mass: f64) -> Result<f64> {
    if mass.is_finite() && mass >= f64::MIN_POSITIVE {
        Ok(mass.ln())
    } else {
        Err(Error::TruncationMassUnderflow)
    }
}

fn finish(raw: f64, convention: OverlapConvention) -> f64 {
    match convention {
        OverlapConvention::Intersection => raw.max(0.0),
        OverlapConvention::AsPrinted => raw,
    }
}

/// Univariate truncated normals. Non-overlapping supports give +∞.
pub fn bc_distance_truncated_normal_1d(
    p: &TruncatedGaussian,
    q: &TruncatedGaussian,
    convention: OverlapConvention,
) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    let (mp, vp) = (p.model.mean[0], p.model.cov[(0, 0)]);
    let (mq, vq) = (q.model.mean[0], q.model.cov[(0, 0)]);
    let (a, b, c, d) = (p.lower[0], p.upper[0], q.lower[0], q.upper[0]);
    if disjoint(a, b, c, d) {
        return Ok(f64::INFINITY);
    }
    let untruncated = bc_distance_normal_1d((mp, vp), (mq, vq))?;
    let (sp, sq) = (vp.sqrt(), vq.sqrt());
    let ln_zp = checked_ln(norm_interval((a - mp) / sp, (b - mp) / sp))?;
    let ln_zq = checked_ln(norm_interval((c - mq) / sq, (d - mq) / sq))?;

    let nu = (mp * vq + mq * vp) / (vp + vq);
    let varsigma = (2.0 * vp * vq / (vp + vq)).sqrt();
    let (l, u) = convention.bounds(a, b, c, d);
    let ln_cross = checked_ln(norm_interval((l - nu) / varsigma, (u - nu) / varsigma))?;

    Ok(finish(untruncated + 0.5 * ln_zp + 0.5 * ln_zq - ln_cross, convention))
}

struct BoxMass {
    value: f64,
    std_error: f64,
}

/// P[lo ≤ X ≤ hi] for X ~ N(mean, cov).
///
/// Diagonal covariances are integrated exactly. Otherwise draws
/// `samples` points (as antithetic pairs μ ± Lz) from the Gaussian and
/// counts box hits.
fn box_mass(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<BoxMass> {
    let m = mean.len();
    if is_diagonal(cov) {
        let mut value = 1.0;
        for i in 0..m {
            let s = cov[(i, i)].sqrt();
            if !(s > 0.0) {
                return Err(Error::NonpositiveVariance(cov[(i, i)]));
            }
            value *= norm_interval((lo[i] - mean[i]) / s, (hi[i] - mean[i]) / s);
        }
        return Ok(BoxMass { value, std_error: 0.0 });
    }

    let factor = sqrt_factor(cov);
    let pairs = samples.div_ceil(2).max(1);
    let mut rng = stream(seed);
    let mut z = DVector::<f64>::zeros(m);
    let mut offset = DVector::<f64>::zeros(m);
    let inside = |sign: f64, offset: &DVector<f64>| {
        (0..m).all(|i| {
            let x = mean[i] + sign * offset[i];
            x >= lo[i] && x <= hi[i]
        })
    };
    let (mut sum, mut sum_sq) = (0.0_f64, 0.0_f64);
    for _ in 0..pairs {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        factor.mul_to(&z, &mut offset);
        let hits = inside(1.0, &offset) as u8 + inside(-1.0, &offset) as u8;
        let v = 0.5 * hits as f64;
        sum += v;
        sum_sq += v * v;
    }
    let n = pairs as f64;
    let value = sum / n;
    let var = if pairs > 1 { ((sum_sq - n * value * value) / (n - 1.0)).max(0.0) } else { 0.0 };
    if !(value > 0.0) {
        return Err(Error::IntegrationFailure(format!("box mass estimate {value} from {} samples", 2 * pairs)));
    }
    Ok(BoxMass { value, std_error: (var / n).sqrt() })
}

/// A matrix `L` with `L Lᵀ = cov`: Cholesky when possible, otherwise the
/// eigenvalue square root with negative eigenvalues clamped to zero.
fn sqrt_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(cov);
    if let Some(chol) = Cholesky::new(sym.clone()) {
        return chol.l();
    }
    let eig = SymmetricEigen::new(sym);
    let mut v = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// Truncated multivariate normals.
///
/// Returns +∞ when the supports are disjoint in any coordinate. Monte Carlo
/// integrals use `mc_samples` draws on independent streams derived from
/// `seed`; the reported standard error propagates all three through the
/// logarithms.
pub fn bc_distance_truncated_mvn(
    p: &TruncatedGaussian,
    q: &TruncatedGaussian,
    mc_samples: usize,
    seed: u64,
    convention: OverlapConvention,
) -> Result<TruncatedDistance> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("mc_samples must be positive"));
    }
    let m = p.dim();
    if (0..m).any(|i| disjoint(p.lower[i], p.upper[i], q.lower[i], q.upper[i])) {
        return Ok(TruncatedDistance::exact(f64::INFINITY));
    }
    let untruncated = bc_distance_mvn(&p.model, &q.model)?;

    let (sp, sq) = (&p.model.cov, &q.model.cov);
    let (cross_mean, cross_cov) = if p.model.is_diagonal() && q.model.is_diagonal() {
        let mut mean = DVector::zeros(m);
        let mut cov = DMatrix::zeros(m, m);
        for i in 0..m {
            let (vp, vq) = (sp[(i, i)], sq[(i, i)]);
            mean[i] = (p.model.mean[i] * vq + q.model.mean[i] * vp) / (vp + vq);
            cov[(i, i)] = 2.0 * vp * vq / (vp + vq);
        }
        (mean, cov)
    } else {
        let total = Cholesky::new(symmetrize(&(sp + sq))).ok_or(Error::SingularAverageCovariance)?;
        // T = Σp (Σp + Σq)⁻¹ Σq,  m = Σq (Σp + Σq)⁻¹ μp + Σp (Σp + Σq)⁻¹ μq
        let t = sp * total.solve(sq);
        let mean = sq * total.solve(&p.model.mean) + sp * total.solve(&q.model.mean);
        (mean, symmetrize(&t) * 2.0)
    };
    let (mut l, mut u) = (DVector::zeros(m), DVector::zeros(m));
    for i in 0..m {
        (l[i], u[i]) = convention.bounds(p.lower[i], p.upper[i], q.lower[i], q.upper[i]);
    }

    let zp = box_mass(&p.model.mean, sp, &p.lower, &p.upper, mc_samples, derive_seed(seed, &[0]))?;
    let zq = box_mass(&q.model.mean, sq, &q.lower, &q.upper, mc_samples, derive_seed(seed, &[1]))?;
    let cross = box_mass(&cross_mean, &cross_cov, &l, &u, mc_samples, derive_seed(seed, &[2]))?;

    let raw = untruncated + 0.5 * checked_ln(zp.value)? + 0.5 * checked_ln(zq.value)? - checked_ln(cross.value)?;
    let std_error = ((0.5 * zp.std_error / zp.value).powi(2)
        + (0.5 * zq.std_error / zq.value).powi(2)
        + (cross.std_error / cross.value).powi(2))
    .sqrt();
    Ok(TruncatedDistance { value: finish(raw, convention), std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tn(mean: f64, var: f64, lo: f64, hi: f64) -> TruncatedGaussian {
        TruncatedGaussian::univariate(mean, var, lo, hi).unwrap()
    }

    fn diag_tmvn(means: &[f64], vars: &[f64], lo: &[f64], hi: &[f64]) -> TruncatedGaussian {
        TruncatedGaussian::new(
            GaussianModel::diagonal(means, vars).unwrap(),
            DVector::from_column_slice(lo),
            DVector::from_column_slice(hi),
        )
        .unwrap()
    }

    const I: OverlapConvention = OverlapConvention::Intersection;

    /// ∫ √(p q) over the common support by brute-force midpoint sums of the
    /// truncated densities themselves.
    fn brute_force_1d(p: (f64, f64, f64, f64), q: (f64, f64, f64, f64)) -> f64 {
        let dens = |x: f64, (m, v, a, b): (f64, f64, f64, f64)| {
            if x < a || x > b {
                return 0.0;
            }
            let s = v.sqrt();
            crate::special::normal_density(x, m, v) / norm_interval((a - m) / s, (b - m) / s)
        };
        let (lo, hi) = (p.2.max(q.2).max(-40.0), p.3.min(q.3).min(40.0));
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        let rho: f64 = (0..n).map(|i| lo + (i as f64 + 0.5) * h).map(|x| (dens(x, p) * dens(x, q)).sqrt() * h).sum();
        -rho.ln()
    }

    #[test]
    fn identical_truncated_normals() {
        let p = tn(0.3, 2.0, -1.0, 2.5);
        assert_abs_diff_eq!(bc_distance_truncated_normal_1d(&p, &p, I).unwrap(), 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            bc_distance_truncated_normal_1d(&p, &p, OverlapConvention::AsPrinted).unwrap(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn wide_bounds_recover_untruncated() {
        let p = tn(0.0, 1.0, -8.0, 8.0);
        let q = tn(1.0, 1.0, -8.0, 8.0);
        assert_abs_diff_eq!(bc_distance_truncated_normal_1d(&p, &q, I).unwrap(), 0.125, epsilon = 1e-6);
    }

    #[test]
    fn disjoint_supports_are_infinitely_distant() {
        let p = tn(0.0, 1.0, 0.0, 1.0);
        let q = tn(0.0, 1.0, 2.0, 3.0);
        assert_eq!(bc_distance_truncated_normal_1d(&p, &q, I).unwrap(), f64::INFINITY);
        // touching intervals have a measure-zero overlap
        let r = tn(0.0, 1.0, 1.0, 3.0);
        assert_eq!(bc_distance_truncated_normal_1d(&p, &r, I).unwrap(), f64::INFINITY);
        assert_eq!(
            bc_distance_truncated_normal_1d(&p, &q, OverlapConvention::AsPrinted).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn truncated_normal_matches_brute_force() {
        let cases = [
            ((0.0, 1.0, -1.0, 2.0), (0.5, 2.0, -0.5, 3.0)),
            ((1.0, 0.5, 0.0, f64::INFINITY), (-1.0, 1.5, f64::NEG_INFINITY, 1.5)),
            ((0.0, 1.0, -0.2, 0.2), (0.1, 0.3, -1.0, 1.0)),
        ];
        for (p, q) in cases {
            let d = bc_distance_truncated_normal_1d(&tn(p.0, p.1, p.2, p.3), &tn(q.0, q.1, q.2, q.3), I).unwrap();
            assert_abs_diff_eq!(d, brute_force_1d(p, q), epsilon = 1e-7);
        }
    }

    #[test]
    fn as_printed_uses_lower_minimum() {
        // with a < c the printed box [a, min(b, d)] is wider than the overlap
        let p = tn(0.0, 1.0, -1.0, 2.0);
        let q = tn(0.5, 1.0, 0.5, 3.0);
        let inter = bc_distance_truncated_normal_1d(&p, &q, I).unwrap();
        let printed = bc_distance_truncated_normal_1d(&p, &q, OverlapConvention::AsPrinted).unwrap();
        assert!(printed < inter);
        // with a == c both conventions coincide
        let q = tn(0.5, 1.0, -1.0, 3.0);
        assert_eq!(
            bc_distance_truncated_normal_1d(&p, &q, I).unwrap(),
            bc_distance_truncated_normal_1d(&p, &q, OverlapConvention::AsPrinted).unwrap()
        );
    }

    #[test]
    fn mass_underflow_is_reported() {
        let p = tn(0.0, 1.0, 60.0, 61.0);
        let q = tn(60.0, 1.0, 59.0, 62.0);
        assert!(matches!(bc_distance_truncated_normal_1d(&p, &q, I), Err(Error::TruncationMassUnderflow)));
    }

    #[test]
    fn invalid_intervals_rejected() {
        assert!(TruncatedGaussian::univariate(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(TruncatedGaussian::univariate(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(TruncatedGaussian::univariate(0.0, 1.0, f64::INFINITY, f64::INFINITY).is_err());
        assert!(TruncatedGaussian::univariate(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn diagonal_mvn_is_sum_of_univariate() {
        let p = diag_tmvn(&[0.0, 1.0], &[1.0, 0.5], &[-1.0, 0.0], &[2.0, 3.0]);
        let q = diag_tmvn(&[0.5, 0.2], &[2.0, 1.5], &[-0.5, -2.0], &[3.0, 2.0]);
        let d = bc_distance_truncated_mvn(&p, &q, 1000, 1, I).unwrap();
        assert_eq!(d.std_error, 0.0);
        let sum = bc_distance_truncated_normal_1d(&tn(0.0, 1.0, -1.0, 2.0), &tn(0.5, 2.0, -0.5, 3.0), I).unwrap()
            + bc_distance_truncated_normal_1d(&tn(1.0, 0.5, 0.0, 3.0), &tn(0.2, 1.5, -2.0, 2.0), I).unwrap();
        assert_abs_diff_eq!(d.value, sum, epsilon = 1e-8);
    }

    #[test]
    fn mvn_disjoint_in_one_dimension() {
        let p = diag_tmvn(&[0.0, 0.0], &[1.0, 1.0], &[-1.0, 0.0], &[1.0, 1.0]);
        let q = diag_tmvn(&[0.0, 0.0], &[1.0, 1.0], &[-1.0, 2.0], &[1.0, 3.0]);
        assert_eq!(bc_distance_truncated_mvn(&p, &q, 10, 0, I).unwrap().value, f64::INFINITY);
    }

    fn correlated(mean: [f64; 2], rho: f64, half_width: f64) -> TruncatedGaussian {
        TruncatedGaussian::new(
            GaussianModel::new(DVector::from_column_slice(&mean), DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
                .unwrap(),
            DVector::from_element(2, -half_width),
            DVector::from_element(2, half_width),
        )
        .unwrap()
    }

    #[test]
    fn identical_correlated_wide_bounds() {
        let p = correlated([0.0, 0.0], 0.5, 8.0);
        let d = bc_distance_truncated_mvn(&p, &p, 20_000, 3, I).unwrap();
        assert!(d.value.abs() <= 2.0 * d.std_error + 1e-12, "{d:?}");
    }

    #[test]
    fn correlated_tight_box_against_grid_quadrature() {
        // 2-D brute-force ∫∫ √(p q) of the truncated densities on a fine grid
        let p = correlated([0.0, 0.0], 0.5, 1.0);
        let q = correlated([0.5, -0.2], -0.3, 1.5);
        let dens = |x: f64, y: f64, r: f64, mx: f64, my: f64| {
            let (dx, dy) = (x - mx, y - my);
            let det = 1.0 - r * r;
            (-(dx * dx - 2.0 * r * dx * dy + dy * dy) / (2.0 * det)).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let n = 800;
        let h = 2.0 / n as f64;
        let (mut zp, mut zq, mut cross) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h);
                let a = dens(x, y, 0.5, 0.0, 0.0);
                let b = dens(x, y, -0.3, 0.5, -0.2);
                zp += a * h * h;
                cross += (a * b).sqrt() * h * h;
            }
        }
        let n2 = 1200;
        let h2 = 3.0 / n2 as f64;
        for i in 0..n2 {
            for j in 0..n2 {
                let (x, y) = (-1.5 + (i as f64 + 0.5) * h2, -1.5 + (j as f64 + 0.5) * h2);
                zq += dens(x, y, -0.3, 0.5, -0.2) * h2 * h2;
            }
        }
        let expected = -(cross / (zp * zq).sqrt()).ln();
        let d = bc_distance_truncated_mvn(&p, &q, 400_000, 9, I).unwrap();
        assert!(d.std_error > 0.0);
        assert!((d.value - expected).abs() < 4.0 * d.std_error, "{d:?} vs {expected}");
    }

    #[test]
    fn correlated_wide_bounds_matches_closed_form() {
        let p = correlated([0.0, 0.0], 0.5, 8.0);
        let q = correlated([1.0, 0.0], 0.5, 8.0);
        let closed = bc_distance_mvn(&p.model, &q.model).unwrap();
        let d = bc_distance_truncated_mvn(&p, &q, 100_000, 5, I).unwrap();
        assert!((d.value - closed).abs() <= 3.0 * d.std_error + 1e-12);
    }

    #[test]
    fn mc_path_is_seed_deterministic() {
        let p = correlated([0.0, 0.0], 0.5, 1.0);
        let q = correlated([0.3, 0.0], 0.2, 1.2);
        let a = bc_distance_truncated_mvn(&p, &q, 5000, 42, I).unwrap();
        let b = bc_distance_truncated_mvn(&p, &q, 5000, 42, I).unwrap();
        assert_eq!(a, b);
        let c = bc_distance_truncated_mvn(&q, &p, 5000, 42, I).unwrap();
        assert!((a.value - c.value).abs() <= 3.0 * (a.std_error.powi(2) + c.std_error.powi(2)).sqrt());
    }

    proptest! {
        #[test]
        fn truncated_1d_symmetric_nonnegative(
            mp in -2.0..2.0f64, vp in 0.25..4.0f64, mq in -2.0..2.0f64, vq in 0.25..4.0f64,
            a in -3.0..0.0f64, wa in 0.5..4.0f64, c in -3.0..0.0f64, wc in 0.5..4.0f64,
        ) {
            let p = tn(mp, vp, a, a + wa);
            let q = tn(mq, vq, c, c + wc);
            let d1 = bc_distance_truncated_normal_1d(&p, &q, I).unwrap();
            let d2 = bc_distance_truncated_normal_1d(&q, &p, I).unwrap();
            prop_assert!(d1 >= 0.0);
            if d1.is_finite() {
                prop_assert!((d1 - d2).abs() < 1e-12 * (1.0 + d1));
            } else {
                prop_assert!(d2.is_infinite());
            }
        }
    }
}
