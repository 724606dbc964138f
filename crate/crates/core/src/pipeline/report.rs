use std::fs;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use super::config::{ConfigEcho, OutputFormat, RunConfig, Variable};
use super::{rank_similarity, Cell, DistanceMatrix, MatrixMetadata, RankedPair};
use crate::error::{Error, Result};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SUMMARY_FILE: &str = "summary.json";

/// Six significant digits, `inf` for +∞.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    round_sig(v).to_string()
}

fn round_sig(v: f64) -> f64 {
    format!("{v:.5e}").parse().expect("formatted float parses")
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::Value(v) => format_value(*v),
        Cell::Error(reason) => format!("ERR:{}", sanitize(reason)),
    }
}

fn sanitize(reason: &str) -> String {
    reason.replace([',', ';'], ";").replace(['\n', '\r', '"'], " ")
}

pub(crate) fn serialize_cell<S: Serializer>(cell: &Cell, s: S) -> std::result::Result<S::Ok, S::Error> {
    match cell {
        Cell::Value(v) if v.is_finite() => s.serialize_f64(round_sig(*v)),
        other => s.serialize_str(&cell_text(other)),
    }
}

/// Creates `dir` if needed and checks that a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    let fail = |e: std::io::Error| Error::Config(format!("output directory {} is not writable: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".distkit-write-check");
    fs::write(&probe, b"").map_err(fail)?;
    fs::remove_file(&probe).map_err(fail)
}

pub fn report_file_name(metadata: &MatrixMetadata, format: OutputFormat) -> String {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    format!("{}_{}_iter{}.{ext}", metadata.variable, metadata.reduction, metadata.iteration)
}

fn render_csv(matrix: &DistanceMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["market".to_string()];
    header.extend(matrix.labels.iter().cloned());
    w.write_record(&header)?;
    for (i, label) in matrix.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend((0..matrix.size()).map(|j| cell_text(matrix.get(i, j))));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct CellRow<'a>(#[serde(serialize_with = "serialize_cells")] Vec<&'a Cell>);

fn serialize_cells<S: Serializer>(cells: &[&Cell], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(cells.len()))?;
    for c in cells {
        seq.serialize_element(&CellRef(c))?;
    }
    seq.end()
}

struct CellRef<'a>(&'a Cell);

impl Serialize for CellRef<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_cell(self.0, s)
    }
}

#[derive(Serialize)]
struct MatrixReport<'a> {
    library_version: &'static str,
    metadata: &'a MatrixMetadata,
    config: ConfigEcho,
    labels: &'a [String],
    values: Vec<CellRow<'a>>,
}

fn render_json(matrix: &DistanceMatrix, config: &RunConfig) -> Result<String> {
    let n = matrix.size();
    let report = MatrixReport {
        library_version: LIBRARY_VERSION,
        metadata: &matrix.metadata,
        config: config.echo(),
        labels: &matrix.labels,
        values: (0..n).map(|i| CellRow((0..n).map(|j| matrix.get(i, j)).collect())).collect(),
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryEntry {
    pub variable: Variable,
    pub reduction: &'static str,
    pub iteration: usize,
    pub most_similar: Option<RankedPair>,
    pub error_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub library_version: &'static str,
    pub config: ConfigEcho,
    pub matrices: Vec<SummaryEntry>,
}

impl Summary {
    pub fn new(matrices: &[DistanceMatrix], config: &RunConfig) -> Self {
        Self {
            library_version: LIBRARY_VERSION,
            config: config.echo(),
            matrices: matrices
                .iter()
                .map(|m| SummaryEntry {
                    variable: m.metadata.variable,
                    reduction: m.metadata.reduction,
                    iteration: m.metadata.iteration,
                    most_similar: rank_similarity(m).into_iter().next(),
                    error_cells: m.metadata.error_cells,
                })
                .collect(),
        }
    }
}

/// Writes one file per matrix in the configured format plus `summary.json`.
/// Returns the paths written, summary last.
pub fn emit_report(matrices: &[DistanceMatrix], config: &RunConfig) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::with_capacity(matrices.len() + 1);
    for m in matrices {
        let body = match config.output_format {
            OutputFormat::Csv => render_csv(m)?,
            OutputFormat::Json => render_json(m, config)?,
        };
        let path = config.output_dir.join(report_file_name(&m.metadata, config.output_format));
        fs::write(&path, body)?;
        written.push(path);
    }
    let path = config.output_dir.join(SUMMARY_FILE);
    fs::write(&path, serde_json::to_string_pretty(&Summary::new(matrices, config))? + "\n")?;
    written.push(path);
    Ok(written)
}

/// Reads a matrix written by [`emit_report`] in CSV form: labels and the
/// row-major cells.
pub fn parse_csv_matrix(text: &str) -> Result<(Vec<String>, Vec<Cell>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut cells = Vec::with_capacity(labels.len() * labels.len());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != labels.len() + 1 || record[0] != labels[r.min(labels.len().saturating_sub(1))] {
            return Err(Error::MalformedRow { line, reason: "row does not match header".into() });
        }
        for field in record.iter().skip(1) {
            cells.push(match field {
                "inf" => Cell::Value(f64::INFINITY),
                f if f.starts_with("ERR:") => Cell::Error(f[4..].to_string()),
                f => Cell::Value(
                    f.parse().map_err(|_| Error::MalformedRow { line, reason: format!("bad value '{f}'") })?,
                ),
            });
        }
    }
    if cells.len() != labels.len() * labels.len() {
        return Err(Error::MalformedRow { line: 1, reason: "matrix is not square".into() });
    }
    Ok((labels, cells))
}
