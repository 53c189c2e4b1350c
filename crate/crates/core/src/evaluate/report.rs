use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use super::copeland::{ComparisonMatrix, CopelandResult, Metric};
use super::metrics::MetricReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("csv error: {0}")]
    Csv(String),
    #[error("metric table needs a `model` column")]
    NoModelColumn,
    #[error("unknown metric column `{0}`")]
    UnknownMetric(String),
    #[error("row {row}: `{value}` is not a number")]
    NonNumeric { row: usize, value: String },
}

/// Reads a results table `model,<metric>...` into a comparison matrix over
/// the metrics present (column names as in [`Metric::name`], any case).
/// Missing metrics are NaN in the reports and excluded from the matrix.
pub fn load_metric_table<R: Read>(source: R) -> Result<ComparisonMatrix, TableError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| TableError::Csv(e.to_string()))?.clone();
    let model_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("model") || h.eq_ignore_ascii_case("models"))
        .ok_or(TableError::NoModelColumn)?;
    let mut columns = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i == model_col {
            continue;
        }
        let metric = Metric::parse(h).ok_or_else(|| TableError::UnknownMetric(h.to_string()))?;
        columns.push((i, metric));
    }

    let mut names = Vec::new();
    let mut reports = Vec::new();
    for (row_no, row) in reader.records().enumerate() {
        let row = row.map_err(|e| TableError::Csv(e.to_string()))?;
        let mut values = [f64::NAN; 7];
        for &(i, metric) in &columns {
            let raw = row.get(i).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| TableError::NonNumeric {
                row: row_no + 1,
                value: raw.to_string(),
            })?;
            let slot = Metric::ALL.iter().position(|m| *m == metric).expect("listed");
            values[slot] = v;
        }
        names.push(row.get(model_col).unwrap_or("").to_string());
        reports.push(MetricReport::from_values(values));
    }
    let metrics = Metric::ALL
        .into_iter()
        .filter(|m| columns.iter().any(|(_, c)| c == m))
        .collect();
    Ok(ComparisonMatrix::new(names, reports).with_metrics(metrics))
}

fn name_width<'a>(names: impl Iterator<Item = &'a str>) -> usize {
    names.map(str::len).max().unwrap_or(0).max(6) + 2
}

/// Aligned text table: one row per model, RMSE MAE MAPE SI U95 R2 NSE.
pub fn metric_table(names: &[String], reports: &[MetricReport]) -> String {
    let w = name_width(names.iter().map(String::as_str));
    let mut out = format!("{:<w$}", "Models");
    for m in Metric::ALL {
        let _ = write!(out, "{:>12}", m.name());
    }
    out.push('\n');
    for (name, r) in names.iter().zip(reports) {
        let _ = write!(out, "{name:<w$}");
        for m in Metric::ALL {
            let _ = write!(out, "{:>12.4}", m.value(r));
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(names: &[String], reports: &[MetricReport]) -> String {
    let mut out = String::from("model,rmse,mae,mape,si,u95,r2,nse,u95_standard,r2_pearson,mape_excluded,n_rows\n");
    for (name, r) in names.iter().zip(reports) {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{},{},{},{}",
            r.rmse, r.mae, r.mape, r.si, r.u95, r.r2, r.nse, r.u95_standard, r.r2_pearson, r.mape_excluded, r.n_rows
        );
    }
    out
}

/// Aligned text table: Models, Copeland scores, Wins, Losses, Rank, in input order.
pub fn copeland_table(result: &CopelandResult) -> String {
    let w = name_width(result.entries.iter().map(|e| e.name.as_str()));
    let mut out = format!("{:<w$}{:>17}{:>7}{:>8}{:>6}\n", "Models", "Copeland scores", "Wins", "Losses", "Rank");
    for e in &result.entries {
        let _ = writeln!(
            out,
            "{:<w$}{:>17}{:>7}{:>8}{:>6}{}",
            e.name,
            e.score,
            e.wins,
            e.losses,
            e.rank,
            if e.tied { "  (score tie)" } else { "" }
        );
    }
    out
}

pub fn copeland_csv(result: &CopelandResult) -> String {
    let mut out = String::from("model,copeland_score,wins,losses,rank,tied\n");
    for e in &result.entries {
        let _ = writeln!(out, "{},{},{},{},{},{}", e.name, e.score, e.wins, e.losses, e.rank, e.tied);
    }
    out
}
