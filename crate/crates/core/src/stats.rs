//! Sample moments, eigenvalue log-determinants and rolling volatility.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on covariance-like inputs.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOL * λ_max` reject a covariance as indefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Default ridge, relative to the mean variance `trace(Σ)/m`.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// A labeled ticker × date matrix for one market and one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    pub market_id: String,
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row per ticker, one column per date.
    pub values: DMatrix<f64>,
}

impl PanelData {
    pub fn new(
        market_id: impl Into<String>,
        tickers: Vec<String>,
        dates: Vec<NaiveDate>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != tickers.len() {
            return Err(Error::DimensionMismatch(values.nrows(), tickers.len()));
        }
        if values.ncols() != dates.len() {
            return Err(Error::DimensionMismatch(values.ncols(), dates.len()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("dates must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("panel contains non-finite values"));
        }
        Ok(Self { market_id: market_id.into(), tickers, dates, values })
    }

    pub fn n_tickers(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_dates(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps the given rows, in the given order.
    pub fn select_tickers(&self, rows: &[usize]) -> Self {
        Self {
            market_id: self.market_id.clone(),
            tickers: rows.iter().map(|&r| self.tickers[r].clone()).collect(),
            dates: self.dates.clone(),
            values: self.values.select_rows(rows),
        }
    }

    /// Restricts the panel to `dates`, which must all be present.
    pub fn restrict_dates(&self, dates: &[NaiveDate]) -> Result<Self> {
        let cols = dates
            .iter()
            .map(|d| {
                self.dates
                    .binary_search(d)
                    .map_err(|_| Error::invalid(format!("date {d} missing from panel {}", self.market_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            market_id: self.market_id.clone(),
            tickers: self.tickers.clone(),
            dates: dates.to_vec(),
            values: self.values.select_columns(&cols),
        })
    }
}

/// Mean vector and covariance matrix of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianModel {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::DimensionMismatch(cov.nrows(), cov.ncols()));
        }
        if mean.len() != cov.nrows() {
            return Err(Error::DimensionMismatch(mean.len(), cov.nrows()));
        }
        check_symmetric(&cov)?;
        let eig = symmetric_eigenvalues(&cov);
        let max = eig.iter().cloned().fold(0.0_f64, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL * max {
            return Err(Error::NotPositiveSemidefinite(min));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Diagonal model from per-coordinate means and variances.
    pub fn diagonal(means: &[f64], variances: &[f64]) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::DimensionMismatch(means.len(), variances.len()));
        }
        Self::new(
            DVector::from_column_slice(means),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(&self.cov)
    }
}

pub(crate) fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(k, &v)| {
        let (i, j) = (k % m.nrows(), k / m.nrows());
        i == j || v == 0.0
    })
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
    }
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

/// Eigenvalues from the symmetric solver (the upper triangle is mirrored
/// first so tiny asymmetries cannot leak in).
pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Row means and unbiased covariance of a variables × observations matrix,
/// with `regularization · I` added to the covariance.
pub fn estimate_gaussian(samples: &DMatrix<f64>, regularization: f64) -> Result<GaussianModel> {
    if !(regularization >= 0.0) {
        return Err(Error::invalid("regularization must be nonnegative"));
    }
    let (mean, mut cov) = sample_moments(samples)?;
    for i in 0..cov.nrows() {
        cov[(i, i)] += regularization;
    }
    GaussianModel::new(mean, cov)
}

/// Like [`estimate_gaussian`], with ridge `DEFAULT_RIDGE · trace(Σ)/m`.
///
/// Rejects samples whose total variance is zero: no ridge can give such a
/// covariance a meaningful scale.
pub fn estimate_gaussian_ridged(samples: &DMatrix<f64>) -> Result<GaussianModel> {
    let (mean, mut cov) = sample_moments(samples)?;
    let m = cov.nrows();
    let ridge = DEFAULT_RIDGE * cov.trace() / m as f64;
    if !(ridge > 0.0) {
        return Err(Error::DegenerateCovariance);
    }
    for i in 0..m {
        cov[(i, i)] += ridge;
    }
    GaussianModel::new(mean, cov)
}

fn sample_moments(samples: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (m, n) = samples.shape();
    if n < 2 {
        return Err(Error::InsufficientObservations { needed: 2, got: n });
    }
    let mean = samples.column_mean();
    let mut centered = samples.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let c = centered.row(i).dot(&centered.row(j)) / (n - 1) as f64;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok((mean, cov))
}

/// `Σ ln max(λᵢ, eigen_floor)` over the eigenvalues of a symmetric matrix.
///
/// The determinant itself is never formed, so this stays finite for
/// dimensions where `det Σ` would over- or underflow.
pub fn log_det_psd(cov: &DMatrix<f64>, eigen_floor: f64) -> Result<f64> {
    if !(eigen_floor > 0.0) {
        return Err(Error::invalid("eigen_floor must be positive"));
    }
    check_symmetric(cov)?;
    Ok(symmetric_eigenvalues(cov).iter().map(|&l| l.max(eigen_floor).ln()).sum())
}

/// Trailing-window standard deviation of log-returns.
///
/// Entry `t` covers `series[t..t + window]`, i.e. `window − 1` log-returns,
/// and uses the unbiased divisor (`window − 2`).
pub fn rolling_volatility(series: &[f64], window: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if window > n {
        return Err(Error::WindowExceedsSeries { window, len: n });
    }
    if window < 3 {
        return Err(Error::invalid("volatility window must cover at least 3 observations"));
    }
    if let Some(i) = series.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::NonpositiveValue(i));
    }
    let returns: Vec<f64> = series.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let k = window - 1;
    Ok(returns
        .windows(k)
        .map(|r| {
            let mean = r.iter().sum::<f64>() / k as f64;
            let ss: f64 = r.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (k - 1) as f64).sqrt()
        })
        .collect())
}
