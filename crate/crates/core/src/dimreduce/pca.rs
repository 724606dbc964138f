//! Principal components with an explained-variance stopping rule.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Matrix whose eigenvectors define the components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaBasis {
    #[default]
    Covariance,
    Correlation,
}

/// Eigen decomposition of a variables × observations matrix.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Eigenvalues, descending, negatives clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// One unit eigenvector per column, in eigenvalue order.
    pub components: DMatrix<f64>,
    /// Row-centered (and, for the correlation basis, row-scaled) data.
    standardized: DMatrix<f64>,
}

impl Pca {
    pub fn fit(data: &DMatrix<f64>, basis: PcaBasis) -> Result<Self> {
        let (m, n) = data.shape();
        if n < 2 {
            return Err(Error::InsufficientObservations { needed: 2, got: n });
        }
        if m == 0 {
            return Err(Error::invalid("PCA needs at least one variable"));
        }
        let mut standardized = data.clone();
        for mut row in standardized.row_iter_mut() {
            let mean = row.mean();
            row.add_scalar_mut(-mean);
            if basis == PcaBasis::Correlation {
                let sd = (row.norm_squared() / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    row /= sd;
                }
            }
        }
        let mut cov = &standardized * standardized.transpose() / (n - 1) as f64;
        for i in 0..m {
            for j in 0..i {
                cov[(j, i)] = cov[(i, j)];
            }
        }
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..m).collect();
        // stable: equal eigenvalues keep their original index order
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let mut components = DMatrix::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(src).into_owned();
            // sign convention: the largest-magnitude entry is positive
            let (mut best, mut best_abs) = (0, -1.0);
            for (i, x) in v.iter().enumerate() {
                if x.abs() > best_abs {
                    best = i;
                    best_abs = x.abs();
                }
            }
            if v[best] < 0.0 {
                v.neg_mut();
            }
            components.set_column(dst, &v);
        }
        Ok(Self { eigenvalues, components, standardized })
    }

    pub fn n_variables(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fraction of total variance carried by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        if total > 0.0 {
            self.eigenvalues.iter().map(|l| l / total).collect()
        } else {
            let m = self.eigenvalues.len() as f64;
            vec![1.0 / m; self.eigenvalues.len()]
        }
    }

    /// Smallest `r` whose cumulative explained variance reaches
    /// `1 − 10^(−sig_digits)`.
    pub fn components_for(&self, sig_digits: u32) -> usize {
        let threshold = 1.0 - 10f64.powi(-(sig_digits as i32));
        let total: f64 = self.eigenvalues.iter().sum();
        if !(total > 0.0) {
            return 1;
        }
        let mut cum = 0.0;
        for (r, l) in self.eigenvalues.iter().enumerate() {
            cum += l;
            if cum / total >= threshold {
                return r + 1;
            }
        }
        self.eigenvalues.len()
    }

    /// Scores on the top `r` components: an `r × n` matrix.
    pub fn scores(&self, r: usize) -> DMatrix<f64> {
        let r = r.min(self.n_variables());
        self.components.columns(0, r).transpose() * &self.standardized
    }
}

/// Principal-component scores retaining the smallest number of components
/// whose cumulative explained variance is at least `1 − 10^(−sig_digits)`.
pub fn pca_reduce(data: &DMatrix<f64>, sig_digits: u32) -> Result<DMatrix<f64>> {
    pca_reduce_with(data, sig_digits, PcaBasis::Covariance)
}

pub fn pca_reduce_with(data: &DMatrix<f64>, sig_digits: u32, basis: PcaBasis) -> Result<DMatrix<f64>> {
    if !(1..=12).contains(&sig_digits) {
        return Err(Error::invalid(format!("sig_digits must lie in [1, 12], got {sig_digits}")));
    }
    let pca = Pca::fit(data, basis)?;
    Ok(pca.scores(pca.components_for(sig_digits)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Four points along the axes, rotated: covariance eigenvalues are
    /// exactly (2a²/3, 2b²/3).
    fn rotated_cross(major: f64, minor: f64, angle: f64) -> DMatrix<f64> {
        let (a, b) = ((1.5 * major).sqrt(), (1.5 * minor).sqrt());
        let pts = [(a, 0.0), (-a, 0.0), (0.0, b), (0.0, -b)];
        let (c, s) = (angle.cos(), angle.sin());
        let mut m = DMatrix::zeros(2, 4);
        for (j, (x, y)) in pts.iter().enumerate() {
            m[(0, j)] = c * x - s * y + 10.0;
            m[(1, j)] = s * x + c * y - 3.0;
        }
        m
    }

    #[test]
    fn rank_one_data_keeps_one_component() {
        let t: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let data = DMatrix::from_fn(4, 20, |r, c| (r as f64 + 1.0) * t[c] + r as f64);
        for d in 1..=12 {
            assert_eq!(pca_reduce(&data, d).unwrap().nrows(), 1, "sig_digits {d}");
        }
    }

    #[test]
    fn threshold_arithmetic_on_known_spectrum() {
        let data = rotated_cross(0.99, 0.01, 0.5);
        let pca = Pca::fit(&data, PcaBasis::Covariance).unwrap();
        assert_abs_diff_eq!(pca.eigenvalues[0], 0.99, epsilon = 1e-12);
        assert_abs_diff_eq!(pca.eigenvalues[1], 0.01, epsilon = 1e-12);
        assert_eq!(pca_reduce(&data, 1).unwrap().nrows(), 1);
        assert_eq!(pca_reduce(&data, 3).unwrap().nrows(), 2);
    }

    #[test]
    fn equal_eigenvalues_need_full_rank() {
        let mut data = DMatrix::zeros(3, 6);
        for i in 0..3 {
            data[(i, 2 * i)] = 1.0;
            data[(i, 2 * i + 1)] = -1.0;
        }
        let pca = Pca::fit(&data, PcaBasis::Covariance).unwrap();
        let ratios = pca.explained_variance_ratio();
        for r in &ratios {
            assert_abs_diff_eq!(*r, 1.0 / 3.0, epsilon = 1e-12);
        }
        for d in 1..=12 {
            assert_eq!(pca_reduce(&data, d).unwrap().nrows(), 3);
        }
    }

    #[test]
    fn too_few_observations() {
        assert!(pca_reduce(&DMatrix::zeros(3, 1), 2).is_err());
        assert!(pca_reduce(&DMatrix::zeros(3, 5), 0).is_err());
        assert!(pca_reduce(&DMatrix::zeros(3, 5), 13).is_err());
    }

    #[test]
    fn correlation_basis_ignores_scale() {
        let base = rotated_cross(0.7, 0.3, 0.3);
        let mut scaled = base.clone();
        scaled.row_mut(0).scale_mut(1000.0);
        let a = Pca::fit(&base, PcaBasis::Correlation).unwrap();
        let b = Pca::fit(&scaled, PcaBasis::Correlation).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    fn column_distances(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.ncols();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                out.push((m.column(i) - m.column(j)).norm());
            }
        }
        out
    }

    proptest! {
        #[test]
        fn explained_variance_is_sorted_and_sums_to_one(entries in prop::collection::vec(-5.0..5.0f64, 5 * 9)) {
            let data = DMatrix::from_row_slice(5, 9, &entries);
            let pca = Pca::fit(&data, PcaBasis::Covariance).unwrap();
            let ratios = pca.explained_variance_ratio();
            prop_assert!(ratios.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!((ratios.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn twelve_digits_preserve_geometry(entries in prop::collection::vec(-5.0..5.0f64, 4 * 12)) {
            let data = DMatrix::from_row_slice(4, 12, &entries);
            let reduced = pca_reduce(&data, 12).unwrap();
            let before = column_distances(&data);
            let after = column_distances(&reduced);
            for (x, y) in before.iter().zip(&after) {
                prop_assert!((x - y).abs() <= 1e-6 * x.max(1e-12));
            }
        }

        #[test]
        fn reduction_is_bit_reproducible(entries in prop::collection::vec(-5.0..5.0f64, 6 * 8), d in 1u32..6) {
            let data = DMatrix::from_row_slice(6, 8, &entries);
            prop_assert_eq!(pca_reduce(&data, d).unwrap(), pca_reduce(&data, d).unwrap());
        }
    }
}
