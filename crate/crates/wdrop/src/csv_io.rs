//! CSV ingestion and export of datasets and prediction triples.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use wdrop_core::linalg::Matrix;
use wdrop_core::RegressionDataset;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: csv::Error },
    #[error("{path}: no column named {column:?} (columns: {available})")]
    MissingColumn { path: PathBuf, column: String, available: String },
    #[error("{path}: column {column:?} is not numeric (categorical columns must be dropped or encoded first)")]
    Categorical { path: PathBuf, column: String },
    #[error("{path}: zero usable rows")]
    NoRows { path: PathBuf },
    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: wdrop_core::data::DataError },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// A dataset read from disk plus the data rows that were dropped.
#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub dataset: RegressionDataset,
    pub feature_names: Vec<String>,
    /// 1-based line numbers (header is line 1) of rejected rows.
    pub skipped_rows: Vec<usize>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Open { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let parse = |source| CsvError::Parse { path: path.to_path_buf(), source };
    let header: Vec<String> = reader.headers().map_err(parse)?.iter().map(str::to_string).collect();
    let records = reader.records().collect::<Result<Vec<_>, _>>().map_err(parse)?;
    Ok((header, records))
}

/// Reads a numeric CSV with a header row. Every column other than
/// `target_column` becomes a feature, in file order.
///
/// A column without a single numeric cell is treated as categorical and
/// rejected. Rows with any other unparsable or non-finite cell are
/// skipped and listed in [`LoadedCsv::skipped_rows`].
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<LoadedCsv, CsvError> {
    let path = path.as_ref();
    let (header, records) = read_table(path)?;
    let target = header.iter().position(|h| h == target_column).ok_or_else(|| CsvError::MissingColumn {
        path: path.to_path_buf(),
        column: target_column.to_string(),
        available: header.join(", "),
    })?;
    if !records.is_empty() {
        for (c, name) in header.iter().enumerate() {
            if records.iter().all(|r| r.get(c).and_then(parse_cell).is_none()) {
                return Err(CsvError::Categorical { path: path.to_path_buf(), column: name.clone() });
            }
        }
    }
    let d = header.len() - 1;
    let (mut xs, mut ys, mut skipped) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in records.iter().enumerate() {
        let cells: Option<Vec<f64>> =
            if rec.len() == header.len() { rec.iter().map(parse_cell).collect() } else { None };
        match cells {
            Some(cells) => {
                for (c, v) in cells.into_iter().enumerate() {
                    if c == target {
                        ys.push(v);
                    } else {
                        xs.push(v);
                    }
                }
            }
            None => skipped.push(i + 2),
        }
    }
    if ys.is_empty() {
        return Err(CsvError::NoRows { path: path.to_path_buf() });
    }
    let n = ys.len();
    let name = path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    let features = Matrix::from_vec(n, d, xs).expect("row width checked");
    let dataset = RegressionDataset::new(name, features, Matrix::column(&ys))
        .map_err(|source| CsvError::Dataset { path: path.to_path_buf(), source })?;
    let feature_names = header.into_iter().enumerate().filter(|&(c, _)| c != target).map(|(_, h)| h).collect();
    Ok(LoadedCsv { dataset, feature_names, skipped_rows: skipped })
}

/// Column names used when exporting: `x` or `x1..xd`, then `y` or `y1..ym`.
pub fn default_header(d: usize, m: usize) -> Vec<String> {
    let names = |prefix: &str, k: usize| -> Vec<String> {
        if k == 1 {
            vec![prefix.to_string()]
        } else {
            (1..=k).map(|i| format!("{prefix}{i}")).collect()
        }
    };
    let mut h = names("x", d);
    h.extend(names("y", m));
    h
}

/// Writes features then targets, one row per point. Floats use Rust's
/// shortest round-trip formatting, so re-reading gives identical values.
pub fn write_dataset(path: impl AsRef<Path>, data: &RegressionDataset) -> Result<(), CsvError> {
    let path = path.as_ref();
    let io = |source| CsvError::Write { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_writer(File::create(path).map_err(io)?);
    let header = default_header(data.feature_dim(), data.target_dim());
    let csv_err = |e: csv::Error| CsvError::Write { path: path.to_path_buf(), source: e.into() };
    w.write_record(&header).map_err(csv_err)?;
    for r in 0..data.len() {
        let row = data.features.row(r).iter().chain(data.targets.row(r)).map(|v| v.to_string());
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io)
}

/// `(mu, sigma, y)` columns of an external model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTriples {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub y: Vec<f64>,
}

/// Reads a CSV with (at least) the columns `mu`, `sigma` and `y`. Unlike
/// [`load_csv`], any bad cell is an error: silently dropping points would
/// change the scores.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionTriples, CsvError> {
    let path = path.as_ref();
    let (header, records) = read_table(path)?;
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| CsvError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
            available: header.join(", "),
        })
    };
    let idx = [col("mu")?, col("sigma")?, col("y")?];
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for rec in &records {
        for (k, &c) in idx.iter().enumerate() {
            match rec.get(c).and_then(parse_cell) {
                Some(v) => out[k].push(v),
                None => return Err(CsvError::Categorical { path: path.to_path_buf(), column: header[c].clone() }),
            }
        }
    }
    if records.is_empty() {
        return Err(CsvError::NoRows { path: path.to_path_buf() });
    }
    let [mu, sigma, y] = out;
    Ok(PredictionTriples { mu, sigma, y })
}

pub fn write_predictions(path: impl AsRef<Path>, t: &PredictionTriples) -> Result<(), CsvError> {
    let path = path.as_ref();
    let io = |source| CsvError::Write { path: path.to_path_buf(), source };
    let mut f = std::io::BufWriter::new(File::create(path).map_err(io)?);
    writeln!(f, "mu,sigma,y").map_err(io)?;
    for ((m, s), y) in t.mu.iter().zip(&t.sigma).zip(&t.y) {
        writeln!(f, "{m},{s},{y}").map_err(io)?;
    }
    f.flush().map_err(io)
}
