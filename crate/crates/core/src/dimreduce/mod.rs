//! Dimension matching: random projection, principal components, and the
//! order-dependent rule that brings two samples to a common dimension.

mod jl;
mod pca;

pub use jl::{gaussian_matrix, jl_min_dimension, jl_project};
pub use pca::{pca_reduce, pca_reduce_with, Pca, PcaBasis};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionMethod {
    Pca,
    Jl,
}

impl ReductionMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReductionMethod::Pca => "pca",
            ReductionMethod::Jl => "jl",
        }
    }
}

impl std::str::FromStr for ReductionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pca" => Ok(ReductionMethod::Pca),
            "jl" => Ok(ReductionMethod::Jl),
            other => Err(Error::Config(format!("unknown reduction method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionConfig {
    pub method: ReductionMethod,
    pub pca_sig_digits: u32,
    pub pca_basis: PcaBasis,
    pub jl_epsilon: f64,
    pub jl_seed: u64,
    pub jl_iterations: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        Self {
            method: ReductionMethod::Pca,
            pca_sig_digits: 2,
            pca_basis: PcaBasis::Covariance,
            jl_epsilon: 0.5,
            jl_seed: 0,
            jl_iterations: 1,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jl_epsilon > 0.0 && self.jl_epsilon < 1.0) {
            return Err(Error::Config(format!("jl_epsilon must lie in (0, 1), got {}", self.jl_epsilon)));
        }
        if !(1..=12).contains(&self.pca_sig_digits) {
            return Err(Error::Config(format!("pca_sig_digits must lie in [1, 12], got {}", self.pca_sig_digits)));
        }
        if self.jl_iterations == 0 {
            return Err(Error::Config("jl_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// How a pair of samples was brought to a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Rows kept by the first sample's PCA (PCA path only).
    pub pca_rank: Option<usize>,
    /// Random-projection bound for the observation count (JL path and PCA
    /// fallback), before capping at the available dimension.
    pub jl_bound: Option<usize>,
    /// True when the PCA path had to project the first sample down to the
    /// second sample's variable count.
    pub jl_fallback: bool,
}

impl MatchedPair {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Brings two variables × observations matrices to the same row count.
///
/// PCA: the first sample keeps enough components for the configured
/// significant digits and the second is reduced to that many components.
/// When the second sample has fewer variables than that, the first sample's
/// scores are randomly projected down to its variable count instead.
///
/// JL: both variable spaces are projected to the random-projection bound for
/// the observation count, capped at the smaller variable count. The two
/// projections share one Gaussian matrix (the narrower one uses a column
/// prefix), so equal inputs give equal outputs.
///
/// The result depends on argument order.
pub fn match_dimensions(a: &DMatrix<f64>, b: &DMatrix<f64>, config: &ReductionConfig) -> Result<MatchedPair> {
    if a.ncols() != b.ncols() {
        return Err(Error::ObservationCountMismatch(a.ncols(), b.ncols()));
    }
    config.validate()?;
    let n = a.ncols();
    match config.method {
        ReductionMethod::Pca => {
            let pa = Pca::fit(a, config.pca_basis)?;
            let rank = pa.components_for(config.pca_sig_digits);
            let pb = Pca::fit(b, config.pca_basis)?;
            if b.nrows() >= rank {
                Ok(MatchedPair { a: pa.scores(rank), b: pb.scores(rank), pca_rank: Some(rank), jl_bound: None, jl_fallback: false })
            } else {
                let k = b.nrows();
                let projected = jl::project_variables(&pa.scores(rank), k, derive_seed(config.jl_seed, &[0x5ca1e]))?;
                Ok(MatchedPair {
                    a: projected,
                    b: pb.scores(k),
                    pca_rank: Some(rank),
                    jl_bound: Some(jl_min_dimension(n, config.jl_epsilon)?),
                    jl_fallback: true,
                })
            }
        }
        ReductionMethod::Jl => {
            let bound = jl_min_dimension(n, config.jl_epsilon)?;
            let k = bound.min(a.nrows()).min(b.nrows());
            Ok(MatchedPair {
                a: jl::project_variables(a, k, config.jl_seed)?,
                b: jl::project_variables(b, k, config.jl_seed)?,
                pca_rank: None,
                jl_bound: Some(bound),
                jl_fallback: false,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionReport {
    pub n_points: usize,
    pub original_dim: usize,
    pub reduced_dim: usize,
    pub pair_fraction_within_bound: f64,
}

/// Fraction of point pairs (rows) whose squared distance ratio lies in
/// `[1 − ε, 1 + ε]`. Pairs at zero original distance count as within.
pub fn jl_distortion_audit(original: &DMatrix<f64>, projected: &DMatrix<f64>, epsilon: f64) -> Result<ProjectionReport> {
    let n = original.nrows();
    if projected.nrows() != n {
        return Err(Error::DimensionMismatch(n, projected.nrows()));
    }
    let (mut within, mut total) = (0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            let before = (original.row(i) - original.row(j)).norm_squared();
            let after = (projected.row(i) - projected.row(j)).norm_squared();
            let ok = if before == 0.0 {
                true
            } else {
                let ratio = after / before;
                ratio >= 1.0 - epsilon && ratio <= 1.0 + epsilon
            };
            within += ok as usize;
        }
    }
    Ok(ProjectionReport {
        n_points: n,
        original_dim: original.ncols(),
        reduced_dim: projected.ncols(),
        pair_fraction_within_bound: if total == 0 { 1.0 } else { within as f64 / total as f64 },
    })
}
