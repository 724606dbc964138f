use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;

use super::config::Variable;
use crate::error::{Error, Result};
use crate::stats::PanelData;

pub const CSV_HEADER: [&str; 7] = ["date", "ticker", "open", "high", "low", "close", "volume"];

/// The five raw panels of one market. All share tickers and dates.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPanels {
    pub market_id: String,
    panels: Vec<PanelData>,
}

impl MarketPanels {
    pub fn new(market_id: impl Into<String>, panels: Vec<PanelData>) -> Result<Self> {
        if panels.len() != Variable::RAW.len() {
            return Err(Error::DimensionMismatch(panels.len(), Variable::RAW.len()));
        }
        let first = &panels[0];
        if panels.iter().any(|p| p.tickers != first.tickers || p.dates != first.dates) {
            return Err(Error::invalid("raw panels must share tickers and dates"));
        }
        Ok(Self { market_id: market_id.into(), panels })
    }

    /// Raw panel for `open` … `volume`.
    pub fn raw(&self, variable: Variable) -> &PanelData {
        let idx = Variable::RAW.iter().position(|&v| v == variable.source()).expect("raw variable");
        &self.panels[idx]
    }

    pub fn tickers(&self) -> &[String] {
        &self.panels[0].tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.panels[0].dates
    }

    pub fn select_tickers(&self, rows: &[usize]) -> Self {
        Self { market_id: self.market_id.clone(), panels: self.panels.iter().map(|p| p.select_tickers(rows)).collect() }
    }

    pub fn restrict_dates(&self, dates: &[NaiveDate]) -> Result<Self> {
        Ok(Self {
            market_id: self.market_id.clone(),
            panels: self.panels.iter().map(|p| p.restrict_dates(dates)).collect::<Result<_>>()?,
        })
    }
}

/// Reads one market file. The market id is the file stem.
pub fn load_panel(path: &Path) -> Result<MarketPanels> {
    let market_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Config(format!("no file name in {}", path.display())))?;
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    read_panel(file, &market_id)
}

/// Parses `date,ticker,open,high,low,close,volume` rows in any order.
///
/// Tickers missing any date of the file, or with a nonpositive value, are
/// dropped with a warning. Tickers come out sorted.
pub fn read_panel(reader: impl std::io::Read, market_id: &str) -> Result<MarketPanels> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header '{}', got '{}'", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut rows: BTreeMap<String, BTreeMap<NaiveDate, [f64; 5]>> = BTreeMap::new();
    let mut all_dates = BTreeSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let malformed = |reason: String| Error::MalformedRow { line, reason };
        if record.len() != CSV_HEADER.len() {
            return Err(malformed(format!("expected {} fields, got {}", CSV_HEADER.len(), record.len())));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| malformed(format!("bad date '{}': {e}", &record[0])))?;
        let ticker = record[1].to_string();
        if ticker.is_empty() {
            return Err(malformed("empty ticker".into()));
        }
        let mut values = [0.0; 5];
        for (k, slot) in values.iter_mut().enumerate() {
            let field = &record[k + 2];
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad {} value '{field}'", CSV_HEADER[k + 2])))?;
        }
        if rows.entry(ticker.clone()).or_default().insert(date, values).is_some() {
            return Err(malformed(format!("duplicate row for {ticker} on {date}")));
        }
        all_dates.insert(date);
    }

    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let mut kept: Vec<(String, Vec<[f64; 5]>)> = Vec::new();
    for (ticker, by_date) in rows {
        if by_date.len() != dates.len() {
            warn!("{market_id}: dropping {ticker}, missing {} of {} dates", dates.len() - by_date.len(), dates.len());
            continue;
        }
        if let Some((d, _)) = by_date.iter().find(|(_, v)| v.iter().any(|&x| !(x > 0.0))) {
            warn!("{market_id}: dropping {ticker}, nonpositive value on {d}");
            continue;
        }
        kept.push((ticker, by_date.into_values().collect()));
    }
    if kept.len() < 2 {
        return Err(Error::PanelTooSmall(kept.len()));
    }

    let tickers: Vec<String> = kept.iter().map(|(t, _)| t.clone()).collect();
    let panels = (0..Variable::RAW.len())
        .map(|k| {
            let values = DMatrix::from_fn(kept.len(), dates.len(), |r, c| kept[r].1[c][k]);
            PanelData::new(market_id, tickers.clone(), dates.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    MarketPanels::new(market_id, panels)
}

/// Dates present in every market.
pub fn common_dates(markets: &[MarketPanels]) -> Vec<NaiveDate> {
    let Some((first, rest)) = markets.split_first() else {
        return Vec::new();
    };
    first
        .dates()
        .iter()
        .filter(|d| rest.iter().all(|m| m.dates().binary_search(d).is_ok()))
        .copied()
        .collect()
}

/// Restricts every market to the dates they all share.
pub fn align_dates(markets: &[MarketPanels]) -> Result<Vec<MarketPanels>> {
    let dates = common_dates(markets);
    if dates.len() < 2 {
        return Err(Error::InsufficientObservations { needed: 2, got: dates.len() });
    }
    markets.iter().map(|m| m.restrict_dates(&dates)).collect()
}

/// Reads a plain numeric matrix (rows = variables, columns = observations).
/// A header row and a leading label column are skipped when they do not
/// parse as numbers.
pub fn read_data_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<(usize, csv::StringRecord)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record));
    }
    let numeric = |f: &str| f.parse::<f64>().is_ok();
    if rows.first().is_some_and(|(_, r)| r.iter().skip(1).any(|f| !numeric(f))) {
        rows.remove(0);
    }
    let Some((_, first)) = rows.first() else {
        return Err(Error::MalformedRow { line: 1, reason: "no data rows".into() });
    };
    let skip = usize::from(!numeric(&first[0]));
    let width = first.len() - skip;
    let mut values = Vec::with_capacity(rows.len() * width);
    for (line, record) in &rows {
        if record.len() - skip != width {
            return Err(Error::MalformedRow { line: *line, reason: format!("expected {width} values, got {}", record.len() - skip) });
        }
        for field in record.iter().skip(skip) {
            let v = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedRow { line: *line, reason: format!("bad value '{field}'") })?;
            values.push(v);
        }
    }
    Ok(DMatrix::from_row_slice(rows.len(), width, &values))
}
