#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use distkit::rng::{derive_seed, stream, StreamRng};
use distkit::stats::PanelData;

pub fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2014, 1, 1).unwrap();
    (0..n).map(|k| start + chrono::Duration::days(k as i64)).collect()
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Parameters of a Gaussian factor model shared by every market drawn from
/// the same generator.
#[derive(Debug, Clone)]
pub struct FactorGenerator {
    pub loadings: DMatrix<f64>,
    pub idio_sd: Vec<f64>,
    pub mean: Vec<f64>,
    pub vol_scale: f64,
}

impl FactorGenerator {
    pub fn new(tickers: usize, factors: usize, seed: u64) -> Self {
        let mut rng = stream(seed);
        Self {
            loadings: DMatrix::from_fn(tickers, factors, |_, _| normal(&mut rng)),
            idio_sd: (0..tickers).map(|_| 0.5 + rng.random::<f64>()).collect(),
            mean: (0..tickers).map(|_| 3.0 * normal(&mut rng)).collect(),
            vol_scale: 1.0,
        }
    }

    pub fn scaled(&self, vol_scale: f64) -> Self {
        Self { vol_scale, ..self.clone() }
    }

    /// One tickers × days panel of independent draws.
    pub fn panel(&self, id: &str, days: usize, seed: u64) -> PanelData {
        let mut rng = stream(seed);
        let (m, f) = self.loadings.shape();
        let mut values = DMatrix::zeros(m, days);
        for t in 0..days {
            let z: Vec<f64> = (0..f).map(|_| normal(&mut rng)).collect();
            for i in 0..m {
                let common: f64 = (0..f).map(|k| self.loadings[(i, k)] * z[k]).sum();
                values[(i, t)] = self.mean[i] + self.vol_scale * (common + self.idio_sd[i] * normal(&mut rng));
            }
        }
        let tickers = (0..m).map(|i| format!("{id}{i:03}")).collect();
        PanelData::new(id, tickers, dates(days), values).unwrap()
    }
}

/// A synthetic market of daily OHLCV rows.
#[derive(Debug, Clone, Copy)]
pub struct OhlcvParams {
    pub tickers: usize,
    pub days: usize,
    pub price_vol: f64,
    pub volume_log_sd: f64,
    pub volume_log_mean: f64,
}

impl Default for OhlcvParams {
    fn default() -> Self {
        Self { tickers: 12, days: 120, price_vol: 0.015, volume_log_sd: 0.4, volume_log_mean: 12.0 }
    }
}

/// CSV text in the input format. Rows are written newest first so ingestion
/// cannot rely on their order.
pub fn ohlcv_csv(params: &OhlcvParams, seed: u64) -> String {
    let mut rng = stream(seed);
    let days = dates(params.days);
    let mut rows = Vec::with_capacity(params.tickers * params.days);
    for i in 0..params.tickers {
        let mut close = 20.0 + 80.0 * rng.random::<f64>();
        let mut trng = stream(derive_seed(seed, &[i as u64]));
        for d in &days {
            let open = close * (params.price_vol * 0.3 * normal(&mut trng)).exp();
            close = open * (params.price_vol * normal(&mut trng)).exp();
            let high = open.max(close) * (1.0 + 0.005 * trng.random::<f64>());
            let low = open.min(close) * (1.0 - 0.005 * trng.random::<f64>());
            let volume = (params.volume_log_mean + params.volume_log_sd * normal(&mut trng)).exp().round().max(1.0);
            rows.push(format!("{d},T{i:03},{open:.4},{high:.4},{low:.4},{close:.4},{volume}"));
        }
    }
    rows.reverse();
    let mut out = String::from("date,ticker,open,high,low,close,volume\n");
    for r in rows {
        writeln!(out, "{r}").unwrap();
    }
    out
}

/// Writes one CSV per market and returns the paths.
pub fn write_markets(dir: &Path, names: &[&str], params: &OhlcvParams, seed: u64) -> Vec<PathBuf> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, ohlcv_csv(params, derive_seed(seed, &[k as u64]))).unwrap();
            path
        })
        .collect()
}

/// Writes a config file pointing at `inputs` and returns its path.
pub fn write_config(dir: &Path, inputs: &[PathBuf], extra: &str) -> PathBuf {
    let list: Vec<String> = inputs.iter().map(|p| p.display().to_string()).collect();
    let path = dir.join("run.conf");
    std::fs::write(&path, format!("inputs = {}\n{extra}", list.join(", "))).unwrap();
    path
}
