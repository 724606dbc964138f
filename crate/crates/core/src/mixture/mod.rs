//! Densities of randomly projected log-normal and normal data.
//!
//! Projecting `d` observations with i.i.d. N(0, 1/k) weights turns each
//! reduced coordinate into a sum of terms `U = X·e^Y` (log-normal data,
//! "NLN") or `U = X·Y` (normal data, "NNP") with X ~ N(0, 1/k) independent
//! of Y ~ N(μ_Y, σ_Y²). The density of the sum is the convolution of the
//! component densities, folded pairwise on a grid.

mod grid;
mod quadrature;

pub use grid::{convolve, tabulate_density, DensityGrid, GRID_MASS_TOL, TABULATE_MASS_TOL};
pub use quadrature::GaussHermite;

use std::f64::consts::{PI, SQRT_2};

use crate::distance::{bc_coefficient_grid, distance_from_coefficient};
use crate::error::{Error, Result};
use crate::special::normal_density;

pub const DEFAULT_QUAD_POINTS: usize = 64;
/// Minimum grid size used by [`GridParams::default`]-driven tabulation.
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;
/// Half-width of the default grid in units of `max component sd · √k`.
pub const DEFAULT_GRID_SPAN: f64 = 8.0;
/// Offset at which an NNP density is evaluated in place of the origin,
/// when no grid step is known (half the default 1e-3 step).
pub const NNP_ORIGIN_OFFSET: f64 = 5e-4;

/// One component `X·e^Y` or `X·Y` with X ~ N(0, 1/k), Y ~ N(mu_y, sigma_y²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponentSpec {
    pub mu_y: f64,
    pub sigma_y: f64,
    pub k: usize,
}

impl MixtureComponentSpec {
    pub fn new(mu_y: f64, sigma_y: f64, k: usize) -> Result<Self> {
        if !(sigma_y >= 0.0) || !mu_y.is_finite() || !sigma_y.is_finite() {
            return Err(Error::invalid(format!("bad component parameters mu_y={mu_y} sigma_y={sigma_y}")));
        }
        if k == 0 {
            return Err(Error::invalid("reduced dimension k must be positive"));
        }
        Ok(Self { mu_y, sigma_y, k })
    }

    /// Standard deviation of the component (its mean is zero).
    pub fn std_dev(&self, family: MixtureFamily) -> f64 {
        let second_moment = match family {
            MixtureFamily::Nln => (2.0 * self.mu_y + 2.0 * self.sigma_y * self.sigma_y).exp(),
            MixtureFamily::Nnp => self.mu_y * self.mu_y + self.sigma_y * self.sigma_y,
        };
        (second_moment / self.k as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureFamily {
    /// Normal log-normal mixture, `X·e^Y`.
    Nln,
    /// Normal normal product, `X·Y`.
    Nnp,
}

/// A component density with its quadrature rule prepared once.
#[derive(Debug, Clone)]
pub struct ComponentDensity {
    family: MixtureFamily,
    spec: MixtureComponentSpec,
    quad_points: usize,
    rule: Option<GaussHermite>,
    origin_offset: f64,
}

impl ComponentDensity {
    pub fn new(family: MixtureFamily, spec: MixtureComponentSpec, quad_points: usize) -> Result<Self> {
        if quad_points < 2 {
            return Err(Error::invalid("need at least two quadrature points"));
        }
        if family == MixtureFamily::Nnp && spec.sigma_y == 0.0 && spec.mu_y == 0.0 {
            return Err(Error::invalid("X·Y with Y ≡ 0 has no density"));
        }
        let rule = (family == MixtureFamily::Nln && spec.sigma_y > 0.0).then(|| GaussHermite::new(quad_points));
        Ok(Self { family, spec, quad_points, rule, origin_offset: NNP_ORIGIN_OFFSET })
    }

    /// Sets where the NNP density is evaluated in place of `u = 0`.
    pub fn with_origin_offset(mut self, offset: f64) -> Self {
        self.origin_offset = offset;
        self
    }

    /// True when the density is unbounded at the origin (NNP with σ_Y > 0),
    /// in which case `eval(0.0)` returns the symmetric-limit substitute.
    pub fn singular_at_origin(&self) -> bool {
        self.family == MixtureFamily::Nnp && self.spec.sigma_y > 0.0
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = self.spec.k as f64;
        match self.family {
            MixtureFamily::Nln => match &self.rule {
                None => normal_density(u, 0.0, (2.0 * self.spec.mu_y).exp() / k),
                Some(rule) => {
                    // y = μ + √2 σ t turns the y-integral into ∫ e^{−t²} g(t) dt
                    let (mu, sigma) = (self.spec.mu_y, self.spec.sigma_y);
                    let g = |t: f64| {
                        let y = mu + SQRT_2 * sigma * t;
                        (-y - 0.5 * k * u * u * (-2.0 * y).exp()).exp()
                    };
                    k.sqrt() / (PI * SQRT_2) * rule.integrate(g)
                }
            },
            MixtureFamily::Nnp => {
                if self.spec.sigma_y == 0.0 {
                    return normal_density(u, 0.0, self.spec.mu_y * self.spec.mu_y / k);
                }
                if u == 0.0 {
                    let h = self.origin_offset;
                    return 0.5 * (self.nnp_integral(h) + self.nnp_integral(-h));
                }
                self.nnp_integral(u)
            }
        }
    }

    /// ∫ N(x; μ, σ²) · N(u; 0, x²/k) dx for `u ≠ 0`, split at `x = 0` and
    /// integrated in `s = ln|x|` by the trapezoidal rule.
    fn nnp_integral(&self, u: f64) -> f64 {
        let (mu, sigma, k) = (self.spec.mu_y, self.spec.sigma_y, self.spec.k as f64);
        // below this |x| the factor e^{−k u²/2x²} is under e^{−40}
        let cutoff = u.abs() * (k / 80.0).sqrt();
        let half = |sign: f64| {
            let centre = sign * mu;
            let hi = centre + 12.0 * sigma;
            if hi <= 0.0 {
                return 0.0;
            }
            let lo = (centre - 12.0 * sigma).max(cutoff).max(hi * 1e-16);
            if lo >= hi {
                return 0.0;
            }
            let (s_lo, s_hi) = (lo.ln(), hi.ln());
            let n = self.quad_points;
            let h = (s_hi - s_lo) / (n - 1) as f64;
            let integrand = |s: f64| {
                let x = s.exp();
                normal_density(x, centre, sigma * sigma) * (k / (2.0 * PI)).sqrt() * (-0.5 * k * u * u / (x * x)).exp()
            };
            let inner: f64 = (1..n - 1).map(|i| integrand(s_lo + i as f64 * h)).sum();
            h * (inner + 0.5 * (integrand(s_lo) + integrand(s_hi)))
        };
        half(1.0) + half(-1.0)
    }
}

/// Density of `X·e^Y` at `u`.
pub fn nln_component_density(u: f64, spec: &MixtureComponentSpec, quad_points: usize) -> Result<f64> {
    Ok(ComponentDensity::new(MixtureFamily::Nln, *spec, quad_points)?.eval(u))
}

/// Density of `X·Y` at `u`; at `u = 0` the value at `±NNP_ORIGIN_OFFSET`
/// is returned when the true density is unbounded there.
pub fn nnp_component_density(u: f64, spec: &MixtureComponentSpec, quad_points: usize) -> Result<f64> {
    Ok(ComponentDensity::new(MixtureFamily::Nnp, *spec, quad_points)?.eval(u))
}

/// Grid used by [`sum_density`]. `None` fields take the defaults: a
/// half-width of `8 · max sd · √k` and `2¹⁴` intervals across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub half_width: Option<f64>,
    pub step: Option<f64>,
    pub quad_points: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { half_width: None, step: None, quad_points: DEFAULT_QUAD_POINTS }
    }
}

impl GridParams {
    fn resolve(&self, components: &[MixtureComponentSpec], family: MixtureFamily) -> (f64, f64) {
        let max_sd = components.iter().map(|c| c.std_dev(family)).fold(0.0, f64::max);
        let half_width =
            self.half_width.unwrap_or(DEFAULT_GRID_SPAN * max_sd * (components.len() as f64).sqrt());
        let step = self.step.unwrap_or(2.0 * half_width / DEFAULT_GRID_POINTS as f64);
        (half_width, step)
    }
}

/// Density of `U₁ + … + U_k`, convolving the tabulated components left to
/// right.
pub fn sum_density(components: &[MixtureComponentSpec], family: MixtureFamily, params: &GridParams) -> Result<DensityGrid> {
    if components.is_empty() {
        return Err(Error::invalid("sum_density needs at least one component"));
    }
    let (half_width, step) = params.resolve(components, family);
    let tabulate = |spec: &MixtureComponentSpec| -> Result<DensityGrid> {
        let density = ComponentDensity::new(family, *spec, params.quad_points)?.with_origin_offset(0.5 * step);
        tabulate_density(|u| density.eval(u), -half_width, half_width, step)
    };
    let mut acc = tabulate(&components[0])?;
    for spec in &components[1..] {
        acc = convolve(&acc, &tabulate(spec)?)?;
    }
    Ok(acc)
}

/// Bhattacharyya distance between two projected sums with the same number
/// of components, both tabulated on the grid implied by the union of their
/// components.
pub fn mixture_distance(
    a: &[MixtureComponentSpec],
    b: &[MixtureComponentSpec],
    family: MixtureFamily,
    quad_points: usize,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let max_sd = a.iter().chain(b).map(|c| c.std_dev(family)).fold(0.0, f64::max);
    let half_width = DEFAULT_GRID_SPAN * max_sd * (a.len() as f64).sqrt();
    let params = GridParams {
        half_width: Some(half_width),
        step: Some(2.0 * half_width / DEFAULT_GRID_POINTS as f64),
        quad_points,
    };
    let fa = sum_density(a, family, &params)?;
    let fb = sum_density(b, family, &params)?;
    distance_from_coefficient(bc_coefficient_grid(&fa, &fb)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(mu: f64, sigma: f64, k: usize) -> MixtureComponentSpec {
        MixtureComponentSpec::new(mu, sigma, k).unwrap()
    }

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn degenerate_nln_is_normal() {
        assert_abs_diff_eq!(nln_component_density(0.0, &spec(0.0, 0.0, 1), 64).unwrap(), INV_SQRT_2PI, epsilon = 1e-15);
        assert_abs_diff_eq!(nln_component_density(0.0, &spec(0.0, 1e-6, 1), 64).unwrap(), INV_SQRT_2PI, epsilon = 1e-9);
        assert_abs_diff_eq!(
            nln_component_density(0.4, &spec(0.2, 0.0, 3), 64).unwrap(),
            normal_density(0.4, 0.0, 0.4_f64.exp() / 3.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn degenerate_nnp_is_normal() {
        assert_abs_diff_eq!(nnp_component_density(0.0, &spec(1.0, 0.0, 1), 64).unwrap(), INV_SQRT_2PI, epsilon = 1e-15);
        assert_abs_diff_eq!(nnp_component_density(0.0, &spec(1.0, 1e-6, 1), 64).unwrap(), INV_SQRT_2PI, epsilon = 1e-6);
        assert!(nnp_component_density(0.3, &spec(0.0, 0.0, 1), 64).is_err());
    }

    #[test]
    fn component_densities_are_even() {
        for s in [spec(0.0, 0.5, 1), spec(0.4, 0.2, 3), spec(-0.3, 1.0, 2)] {
            for u in [0.1, 0.7, 1.3, 2.9] {
                let a = nln_component_density(u, &s, 64).unwrap();
                let b = nln_component_density(-u, &s, 64).unwrap();
                assert!((a - b).abs() < 1e-12);
                let a = nnp_component_density(u, &s, 64).unwrap();
                let b = nnp_component_density(-u, &s, 64).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nnp_matches_bessel_closed_form() {
        // μ_Y = 0: f(u) = √k/(πσ) K₀(√k|u|/σ); K₀ values from high-precision tables
        let k0 = [(0.1, 2.427_069_024_702_016_7), (0.5, 0.924_419_071_227_665_9), (1.0, 0.421_024_438_240_708_3), (2.0, 0.113_893_872_749_533_4)];
        for (u, k0u) in k0 {
            let f = nnp_component_density(u, &spec(0.0, 1.0, 1), 64).unwrap();
            assert_abs_diff_eq!(f, k0u / PI, epsilon = 1e-11);
        }
    }

    #[test]
    fn nnp_origin_uses_offset_average() {
        let s = spec(0.0, 1.0, 1);
        let d = ComponentDensity::new(MixtureFamily::Nnp, s, 64).unwrap();
        assert!(d.singular_at_origin());
        assert_eq!(d.eval(0.0), d.eval(NNP_ORIGIN_OFFSET));
        let d = d.with_origin_offset(0.01);
        assert_eq!(d.eval(0.0), d.eval(0.01));
        assert!(!ComponentDensity::new(MixtureFamily::Nnp, spec(1.0, 0.0, 1), 64).unwrap().singular_at_origin());
    }

    #[test]
    fn doubling_quadrature_nodes_is_converged() {
        for s in [spec(0.0, 0.5, 1), spec(0.3, 0.3, 2), spec(-0.2, 0.1, 3)] {
            for family in [MixtureFamily::Nln, MixtureFamily::Nnp] {
                let base = ComponentDensity::new(family, s, 64).unwrap();
                let fine = ComponentDensity::new(family, s, 128).unwrap();
                let sd = s.std_dev(family);
                for i in 1..=40 {
                    let u = -4.0 * sd + i as f64 * 0.2 * sd;
                    if u.abs() < 1e-9 {
                        continue;
                    }
                    assert!((base.eval(u) - fine.eval(u)).abs() < 1e-8, "{family:?} {s:?} u={u}");
                }
            }
        }
    }

    #[test]
    fn single_component_sum_is_the_component() {
        let s = spec(0.1, 0.3, 1);
        let params = GridParams { half_width: Some(6.0), step: Some(1e-2), quad_points: 64 };
        let sum = sum_density(&[s], MixtureFamily::Nln, &params).unwrap();
        let direct = tabulate_density(|u| nln_component_density(u, &s, 64).unwrap(), -6.0, 6.0, 1e-2).unwrap();
        assert_eq!(sum, direct);
    }

    #[test]
    fn two_degenerate_components_sum_to_standard_normal() {
        let s = spec(0.0, 0.0, 2);
        let sum = sum_density(&[s, s], MixtureFamily::Nln, &GridParams::default()).unwrap();
        assert!(sum.len() >= DEFAULT_GRID_POINTS);
        let worst = (0..sum.len()).map(|i| (sum.values()[i] - normal_density(sum.x(i), 0.0, 1.0)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn nln_sum_moments() {
        let comps = [spec(0.0, 0.2, 3), spec(0.3, 0.1, 3), spec(-0.2, 0.3, 3)];
        let sum = sum_density(&comps, MixtureFamily::Nln, &GridParams::default()).unwrap();
        let expected: f64 = comps.iter().map(|c| (2.0 * c.mu_y + 2.0 * c.sigma_y * c.sigma_y).exp() / 3.0).sum();
        assert!(sum.mean().abs() < 1e-6);
        assert_abs_diff_eq!(sum.variance() / expected, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(sum.mass(), 1.0, epsilon = 1e-12);
        assert!((sum.raw_mass() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nnp_sum_moments() {
        let comps = [spec(1.0, 0.3, 2), spec(-0.5, 0.4, 2)];
        let sum = sum_density(&comps, MixtureFamily::Nnp, &GridParams::default()).unwrap();
        let expected: f64 = comps.iter().map(|c| (c.mu_y * c.mu_y + c.sigma_y * c.sigma_y) / 2.0).sum();
        assert_abs_diff_eq!(sum.variance() / expected, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn mixture_distance_basics() {
        let a = [spec(0.0, 0.2, 2), spec(0.1, 0.2, 2)];
        let b = [spec(0.5, 0.2, 2), spec(0.6, 0.2, 2)];
        assert_abs_diff_eq!(mixture_distance(&a, &a, MixtureFamily::Nln, 64).unwrap(), 0.0, epsilon = 1e-9);
        let d = mixture_distance(&a, &b, MixtureFamily::Nln, 64).unwrap();
        let r = mixture_distance(&b, &a, MixtureFamily::Nln, 64).unwrap();
        assert!(d > 0.01);
        assert_abs_diff_eq!(d, r, epsilon = 1e-12);
        assert!(mixture_distance(&a, &b[..1], MixtureFamily::Nln, 64).is_err());
    }
}
