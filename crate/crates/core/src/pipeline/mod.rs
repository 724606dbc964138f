//! End-to-end runs: load one OHLCV file per market, align dates, derive
//! volatilities, bring each ordered pair of markets to a common dimension and
//! report the full matrix of distances per variable.

mod config;
mod ingest;
mod report;

pub use config::{ConfigEcho, ModelFamily, OutputFormat, RunConfig, Variable, DEFAULT_VOL_WINDOW};
pub use ingest::{align_dates, common_dates, load_panel, read_data_matrix, read_panel, MarketPanels, CSV_HEADER};
pub use report::{emit_report, ensure_writable, format_value, parse_csv_matrix, report_file_name, Summary, SummaryEntry};

use std::cmp::Ordering;
use std::fmt;

use log::info;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dimreduce::{match_dimensions, ReductionConfig};
use crate::distance::{bc_distance_mvn, bc_distance_truncated_mvn, OverlapConvention, TruncatedGaussian};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};
use crate::stats::{estimate_gaussian_ridged, rolling_volatility, PanelData};

pub const THREADS_ENV: &str = "DISTKIT_THREADS";
const SUB_UNIVERSE_TAG: u64 = 0x005e_ed5b;

/// Row-wise rolling volatility. Column `t` is labelled with the last date of
/// its window.
pub fn derive_volatility_panels(panel: &PanelData, window: usize) -> Result<PanelData> {
    let n = panel.n_dates();
    if n <= window {
        return Err(Error::WindowExceedsSeries { window, len: n });
    }
    let rows = (0..panel.n_tickers())
        .map(|r| {
            let series: Vec<f64> = panel.values.row(r).iter().copied().collect();
            rolling_volatility(&series, window)
        })
        .collect::<Result<Vec<_>>>()?;
    let cols = n - window + 1;
    let values = DMatrix::from_fn(panel.n_tickers(), cols, |r, c| rows[r][c]);
    PanelData::new(panel.market_id.clone(), panel.tickers.clone(), panel.dates[window - 1..].to_vec(), values)
}

/// Row indices of a uniform sample of `size` out of `n`, in ascending order.
pub fn sub_universe_rows(n: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > n {
        return Err(Error::invalid(format!("sub-universe size {size} exceeds ticker count {n}")));
    }
    let mut rows = rand::seq::index::sample(&mut stream(seed), n, size).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Uniform sample of tickers without replacement, keeping the panel's row
/// order.
pub fn sample_sub_universe(panel: &PanelData, size: usize, seed: u64) -> Result<PanelData> {
    Ok(panel.select_tickers(&sub_universe_rows(panel.n_tickers(), size, seed)?))
}

/// Seed of the random draws made for ordered pair `(i, j)` in `iteration`.
pub fn pair_seed(sample_seed: u64, i: usize, j: usize, iteration: usize) -> u64 {
    derive_seed(sample_seed, &[i as u64, j as u64, iteration as u64])
}

/// The panel a run compares for `variable`, computed from the market's raw
/// panels.
pub fn variable_panel(market: &MarketPanels, variable: Variable, vol_window: usize) -> Result<PanelData> {
    let raw = market.raw(variable);
    if variable.is_volatility() {
        derive_volatility_panels(raw, vol_window)
    } else {
        Ok(raw.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Value(f64),
    Error(String),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            Cell::Error(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Value(v) => f.write_str(&format_value(*v)),
            Cell::Error(reason) => write!(f, "ERR:{reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixMetadata {
    pub variable: Variable,
    pub reduction: &'static str,
    pub family: ModelFamily,
    pub iteration: usize,
    pub sample_seed: u64,
    pub error_cells: usize,
}

/// Distances between every ordered pair of markets. Row `i`, column `j`
/// holds the distance with market `i` reduced first.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    cells: Vec<Cell>,
    pub metadata: MatrixMetadata,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, cells: Vec<Cell>, metadata: MatrixMetadata) -> Result<Self> {
        if cells.len() != labels.len() * labels.len() {
            return Err(Error::DimensionMismatch(cells.len(), labels.len() * labels.len()));
        }
        Ok(Self { labels, cells, metadata })
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.size() + j]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.get(i, j).value()
    }

    pub fn has_errors(&self) -> bool {
        self.metadata.error_cells > 0
    }

    /// Closest other market to `i` along row `i`, ignoring error cells.
    pub fn nearest_neighbor(&self, i: usize) -> Option<usize> {
        (0..self.size())
            .filter(|&j| j != i)
            .filter_map(|j| self.value(i, j).map(|v| (j, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(j, _)| j)
    }
}

/// Brings panels `i` and `j` to a common dimension and measures the distance
/// between the fitted models. Depends only on the inputs and the cell's
/// coordinates, so a cell computed alone matches the same cell in a full run.
pub fn compute_cell(panels: &[PanelData], i: usize, j: usize, config: &RunConfig, iteration: usize) -> Result<f64> {
    let seed = pair_seed(config.sample_seed, i, j, iteration);
    let reduction = ReductionConfig { jl_seed: seed, ..config.reduction };
    matrix_distance(&panels[i].values, &panels[j].values, &reduction, config.family, config.mc_samples)
}

/// Distance between two variables × observations samples after matching
/// their dimensions. Random draws for the truncated family are keyed off
/// `reduction.jl_seed`.
pub fn matrix_distance(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    reduction: &ReductionConfig,
    family: ModelFamily,
    mc_samples: usize,
) -> Result<f64> {
    let matched = match_dimensions(a, b, reduction)?;
    let pa = estimate_gaussian_ridged(&matched.a)?;
    let pb = estimate_gaussian_ridged(&matched.b)?;
    match family {
        ModelFamily::Mvn => bc_distance_mvn(&pa, &pb),
        ModelFamily::Truncated => {
            let ta = observed_box(pa, &matched.a)?;
            let tb = observed_box(pb, &matched.b)?;
            let seed = derive_seed(reduction.jl_seed, &[u64::MAX]);
            Ok(bc_distance_truncated_mvn(&ta, &tb, mc_samples, seed, OverlapConvention::Intersection)?.value)
        }
    }
}

/// Truncates a fitted model to the per-row range of its sample.
fn observed_box(model: crate::stats::GaussianModel, sample: &DMatrix<f64>) -> Result<TruncatedGaussian> {
    let lower = DVector::from_iterator(sample.nrows(), sample.row_iter().map(|r| r.min()));
    let upper = DVector::from_iterator(sample.nrows(), sample.row_iter().map(|r| r.max()));
    TruncatedGaussian::new(model, lower, upper)
}

/// Worker pool sized by `DISTKIT_THREADS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// All ordered pairs for one variable and iteration. Failing cells are
/// recorded and the rest of the matrix is still computed.
pub fn compute_distance_matrix(
    panels: &[PanelData],
    config: &RunConfig,
    variable: Variable,
    iteration: usize,
) -> Result<DistanceMatrix> {
    let m = panels.len();
    if m < 2 {
        return Err(Error::TooFewPopulations(m));
    }
    if panels.iter().any(|p| p.dates != panels[0].dates) {
        return Err(Error::invalid("panels must share one date vector"));
    }
    let cells: Vec<Cell> = worker_pool()?.install(|| {
        (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / m, idx % m);
                if i == j {
                    return Cell::Value(0.0);
                }
                match compute_cell(panels, i, j, config, iteration) {
                    Ok(d) => Cell::Value(d),
                    Err(e) => Cell::Error(e.to_string()),
                }
            })
            .collect()
    });
    let error_cells = cells.iter().filter(|c| matches!(c, Cell::Error(_))).count();
    let metadata = MatrixMetadata {
        variable,
        reduction: config.reduction.method.name(),
        family: config.family,
        iteration,
        sample_seed: config.sample_seed,
        error_cells,
    };
    DistanceMatrix::new(panels.iter().map(|p| p.market_id.clone()).collect(), cells, metadata)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPair {
    pub from: String,
    pub to: String,
    #[serde(serialize_with = "report::serialize_cell")]
    pub distance: Cell,
}

/// Off-diagonal cells, closest first. Ties go to the lexicographically
/// smaller `(from, to)`; error cells come last.
pub fn rank_similarity(matrix: &DistanceMatrix) -> Vec<RankedPair> {
    let m = matrix.size();
    let mut pairs: Vec<RankedPair> = (0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| RankedPair {
            from: matrix.labels[i].clone(),
            to: matrix.labels[j].clone(),
            distance: matrix.get(i, j).clone(),
        })
        .collect();
    pairs.sort_by(|a, b| {
        let by_value = match (&a.distance, &b.distance) {
            (Cell::Value(x), Cell::Value(y)) => x.total_cmp(y),
            (Cell::Value(_), Cell::Error(_)) => Ordering::Less,
            (Cell::Error(_), Cell::Value(_)) => Ordering::Greater,
            (Cell::Error(_), Cell::Error(_)) => Ordering::Equal,
        };
        by_value.then_with(|| (&a.from, &a.to).cmp(&(&b.from, &b.to)))
    });
    pairs
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub matrices: Vec<DistanceMatrix>,
    pub files: Vec<std::path::PathBuf>,
}

impl RunOutcome {
    pub fn has_error_cells(&self) -> bool {
        self.matrices.iter().any(DistanceMatrix::has_errors)
    }
}

/// Loads, aligns and optionally subsamples the configured markets.
pub fn prepare_markets(config: &RunConfig) -> Result<Vec<MarketPanels>> {
    let loaded = config.input_paths.iter().map(|p| load_panel(p)).collect::<Result<Vec<_>>>()?;
    let mut ids: Vec<&str> = loaded.iter().map(|m| m.market_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("market ids (file stems) must be unique".into()));
    }
    let aligned = align_dates(&loaded)?;
    info!("{} markets aligned on {} dates", aligned.len(), aligned[0].dates().len());
    match config.sub_universe_size {
        None => Ok(aligned),
        Some(size) => aligned
            .iter()
            .enumerate()
            .map(|(k, market)| {
                let seed = derive_seed(config.sample_seed, &[SUB_UNIVERSE_TAG, k as u64]);
                Ok(market.select_tickers(&sub_universe_rows(market.tickers().len(), size, seed)?))
            })
            .collect(),
    }
}

/// Runs the whole experiment and writes the reports.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    ensure_writable(&config.output_dir)?;
    let markets = prepare_markets(config)?;
    let mut matrices = Vec::new();
    for &variable in &config.variables {
        let panels = markets
            .iter()
            .map(|m| variable_panel(m, variable, config.vol_window))
            .collect::<Result<Vec<_>>>()?;
        for iteration in 1..=config.iterations() {
            let matrix = compute_distance_matrix(&panels, config, variable, iteration)?;
            info!("{variable} iteration {iteration}: {} error cells", matrix.metadata.error_cells);
            matrices.push(matrix);
        }
    }
    let files = emit_report(&matrices, config)?;
    Ok(RunOutcome { matrices, files })
}
