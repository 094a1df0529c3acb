//! Report files: full per-fold JSON, summary and wide-table CSVs, and
//! plot-ready CSVs.
//!
//! Summary CSVs have the fixed header `method,split,metric,mean,median,q25,q75`
//! and come as one file per side (`summary_test.csv`, `summary_train.csv`).
//! Plot CSVs have the header `x,mean,q25,median,q75`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use wdrop_core::experiment::{AggregateSummary, FoldReport, Side, SummaryRow};
use wdrop_core::EvalReport;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no reports to write")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot read reports from {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

pub const SUMMARY_HEADER: &str = "method,split,metric,mean,median,q25,q75";
pub const PLOT_HEADER: &str = "x,mean,q25,median,q75";
pub const SIDES: [Side; 2] = [Side::Test, Side::Train];

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ReportError::Io { path: parent.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

pub fn reports_json(reports: &[FoldReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn read_reports(path: &Path) -> Result<Vec<FoldReport>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path: path.to_path_buf(), source })
}

pub fn summary_csv(summary: &AggregateSummary, side: Side) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in summary.rows.iter().filter(|r| r.side == side) {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.method, r.split, r.metric, r.mean, r.median, r.q25, r.q75);
    }
    s
}

fn distinct<'a>(rows: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = Vec::new();
    for r in rows {
        if !seen.iter().any(|s: &String| s == r) {
            seen.push(r.to_string());
        }
    }
    seen
}

/// Methods as rows, metric means as columns: the layout of a results
/// table for one split group and side.
pub fn table_csv(summary: &AggregateSummary, split: &str, side: Side) -> String {
    let mut s = String::from("method");
    for m in EvalReport::METRICS {
        s.push(',');
        s.push_str(m);
    }
    s.push('\n');
    for method in distinct(summary.rows.iter().map(|r| r.method.as_str())) {
        s.push_str(&method);
        for metric in EvalReport::METRICS {
            s.push(',');
            if let Some(r) = summary.get(&method, split, side, metric) {
                let _ = write!(s, "{}", r.mean);
            }
        }
        s.push('\n');
    }
    s
}

/// One plot row per `(x, row)` pair.
pub fn plot_csv<'a>(points: impl IntoIterator<Item = (String, &'a SummaryRow)>) -> String {
    let mut s = String::from(PLOT_HEADER);
    s.push('\n');
    for (x, r) in points {
        let _ = writeln!(s, "{x},{},{},{},{}", r.mean, r.q25, r.median, r.q75);
    }
    s
}

fn splits_of(summary: &AggregateSummary) -> Vec<String> {
    summary.rows.iter().map(|r| r.split.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Writes the whole bench output set into `dir` and returns the paths in
/// writing order.
pub fn write_bench(
    dir: &Path,
    reports: &[FoldReport],
    summary: &AggregateSummary,
) -> Result<Vec<PathBuf>, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut files: Vec<(PathBuf, String)> = vec![
        (dir.join("reports.json"), reports_json(reports)),
        (dir.join("summary.json"), serde_json::to_string_pretty(summary).expect("summary serializes") + "\n"),
    ];
    for side in SIDES {
        files.push((dir.join(format!("summary_{side}.csv")), summary_csv(summary, side)));
        for split in splits_of(summary) {
            files.push((dir.join(format!("table_{split}_{side}.csv")), table_csv(summary, &split, side)));
            for metric in EvalReport::METRICS {
                let points = summary
                    .rows
                    .iter()
                    .filter(|r| r.side == side && r.split == split && r.metric == metric)
                    .map(|r| (r.method.clone(), r));
                files.push((dir.join("plots").join(format!("{split}_{side}_{metric}.csv")), plot_csv(points)));
            }
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (path, body) in files {
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Plot CSVs across the values of a sweep, one file per
/// (method, split, side, metric), `x` being the swept value.
pub fn write_sweep_plots(dir: &Path, runs: &[(String, AggregateSummary)]) -> Result<Vec<PathBuf>, ReportError> {
    let Some((_, first)) = runs.first() else {
        return Err(ReportError::Empty);
    };
    let mut written = Vec::new();
    for method in distinct(first.rows.iter().map(|r| r.method.as_str())) {
        for split in splits_of(first) {
            for side in SIDES {
                for metric in EvalReport::METRICS {
                    let points =
                        runs.iter().filter_map(|(x, s)| s.get(&method, &split, side, metric).map(|r| (x.clone(), r)));
                    let path = dir.join(format!("{method}_{split}_{side}_{metric}.csv"));
                    write_file(&path, &plot_csv(points))?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

pub fn write_text(path: &Path, contents: &str) -> Result<(), ReportError> {
    write_file(path, contents)
}
