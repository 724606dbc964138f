//! Gaussian random projection.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Smallest `k` with `k ≥ 4 ln n / (ε²/2 − ε³/3)`, and at least 1.
pub fn jl_min_dimension(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one point"));
    }
    let denom = epsilon * epsilon / 2.0 - epsilon.powi(3) / 3.0;
    let k = (4.0 * (n as f64).ln() / denom).ceil();
    Ok((k as usize).max(1))
}

/// The `k × d` matrix of i.i.d. N(0, 1) entries for `seed`.
///
/// Entries are drawn column by column, so the matrix for `d` columns is a
/// prefix of the matrix for any larger `d` with the same `k` and seed.
pub fn gaussian_matrix(k: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed);
    // nalgebra storage is column-major
    DMatrix::from_iterator(k, d, (0..k * d).map(|_| StandardNormal.sample(&mut rng)))
}

/// Maps each row of `points` (n × d) to `A x / √k`.
pub fn jl_project(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let d = points.ncols();
    if k == 0 || d == 0 {
        return Err(Error::invalid("projection needs k ≥ 1 and d ≥ 1"));
    }
    let a = gaussian_matrix(k, d, seed);
    Ok(points * a.transpose() / (k as f64).sqrt())
}

/// Projects the variable space of a variables × observations matrix to `k`
/// rows, i.e. `A · data / √k`.
pub(crate) fn project_variables(data: &DMatrix<f64>, k: usize, seed: u64) -> Result<DMatrix<f64>> {
    Ok(jl_project(&data.transpose(), k, seed)?.transpose())
}
