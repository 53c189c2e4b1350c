//! The seven-metric suite.
//!
//! With measured series `D`, predicted series `P`, `n` rows, `D̄` the mean of
//! `D` and `SD` its population standard deviation:
//!
//! ```text
//! r2       = 1 - Σ(D-P)² / ΣD²
//! nse      = 1 - Σ(D-P)² / Σ(D-D̄)²
//! rmse     = sqrt(Σ(D-P)² / n)
//! mae      = Σ|D-P| / n
//! mape     = mean over rows with |D| >= 1e-9 of |(D-P)/D|   (a fraction, not %)
//! si       = rmse / D̄
//! u95      = 1.96 sqrt(max(0, SD² - rmse²))
//! ```
//!
//! `r2` is deliberately not the mean-centred R²: its denominator is the
//! raw sum of squares, so `r2 >= nse` whenever `D̄ != 0`. Two companion
//! values are reported alongside: `u95_standard = 1.96 sqrt(SD² + rmse²)` and
//! `r2_pearson`, the squared correlation between `D` and `P`.
//!
//! In aggregate scope each row's `D` and `P` are the means over the three
//! materials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Output, TargetTriple};

/// Rows with `|D| < MAPE_EPS` are left out of MAPE.
pub const MAPE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
pub enum MetricError {
    #[error("actual has {actual} rows but predicted has {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("no rows to evaluate")]
    EmptyInput,
    #[error("every measured value is zero, MAPE is undefined")]
    AllRowsExcludedFromMape,
    #[error("measured mean is zero, SI is undefined")]
    ZeroMeanForSi,
    #[error("measured series is constant, NSE is undefined")]
    ZeroVarianceForNse,
    #[error("measured series is all zero, R² is undefined")]
    ZeroSumOfSquaresForR2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Aggregate,
    PerOutput(Output),
}

/// Metric values for one model on one series. Undefined values are NaN and
/// the reason is listed in `issues`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scope: Scope,
    pub n_rows: usize,
    pub r2: f64,
    pub nse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mape: f64,
    pub si: f64,
    pub u95: f64,
    pub u95_standard: f64,
    pub r2_pearson: f64,
    /// Rows left out of MAPE because their measured value is zero.
    pub mape_excluded: usize,
    /// `SD² < rmse²`, so `u95` was clamped to zero.
    pub u95_clamped: bool,
    pub issues: Vec<MetricError>,
}

impl MetricReport {
    /// A report holding only the seven headline values, e.g. read from a
    /// published results table. `n_rows` is 0 (unknown).
    pub fn from_values(values: [f64; 7]) -> Self {
        let [rmse, mae, mape, si, u95, r2, nse] = values;
        MetricReport {
            scope: Scope::Aggregate,
            n_rows: 0,
            r2,
            nse,
            rmse,
            mae,
            mape,
            si,
            u95,
            u95_standard: f64::NAN,
            r2_pearson: f64::NAN,
            mape_excluded: 0,
            u95_clamped: false,
            issues: Vec::new(),
        }
    }

    /// Fails with the first undefined-metric issue, if any.
    pub fn strict(&self) -> Result<&Self, MetricError> {
        match self.issues.first() {
            Some(issue) => Err(issue.clone()),
            None => Ok(self),
        }
    }
}

/// Metrics over explicit measured and predicted series.
pub fn compute_series(measured: &[f64], predicted: &[f64], scope: Scope) -> Result<MetricReport, MetricError> {
    if measured.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: measured.len(),
            predicted: predicted.len(),
        });
    }
    if measured.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = measured.len() as f64;
    let mut issues = Vec::new();

    let mean_d = measured.iter().sum::<f64>() / n;
    let mean_p = predicted.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut abs_err = 0.0;
    let mut ss_raw = 0.0;
    let mut ss_tot = 0.0;
    let mut ss_pred = 0.0;
    let mut cross = 0.0;
    let mut ape = 0.0;
    let mut mape_rows = 0usize;
    for (&d, &p) in measured.iter().zip(predicted) {
        let e = d - p;
        ss_res += e * e;
        abs_err += e.abs();
        ss_raw += d * d;
        ss_tot += (d - mean_d) * (d - mean_d);
        ss_pred += (p - mean_p) * (p - mean_p);
        cross += (d - mean_d) * (p - mean_p);
        if d.abs() >= MAPE_EPS {
            ape += (e / d).abs();
            mape_rows += 1;
        }
    }

    let rmse = (ss_res / n).sqrt();
    let r2 = if ss_raw > 0.0 {
        1.0 - ss_res / ss_raw
    } else {
        issues.push(MetricError::ZeroSumOfSquaresForR2);
        f64::NAN
    };
    let nse = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        issues.push(MetricError::ZeroVarianceForNse);
        f64::NAN
    };
    let mape = if mape_rows > 0 {
        ape / mape_rows as f64
    } else {
        issues.push(MetricError::AllRowsExcludedFromMape);
        f64::NAN
    };
    let si = if mean_d != 0.0 {
        rmse / mean_d
    } else {
        issues.push(MetricError::ZeroMeanForSi);
        f64::NAN
    };
    let sd2 = ss_tot / n;
    let radicand = sd2 - rmse * rmse;
    let r2_pearson = if ss_tot > 0.0 && ss_pred > 0.0 {
        cross * cross / (ss_tot * ss_pred)
    } else {
        f64::NAN
    };

    Ok(MetricReport {
        scope,
        n_rows: measured.len(),
        r2,
        nse,
        rmse,
        mae: abs_err / n,
        mape,
        si,
        u95: 1.96 * radicand.max(0.0).sqrt(),
        u95_standard: 1.96 * (sd2 + rmse * rmse).sqrt(),
        r2_pearson,
        mape_excluded: measured.len() - mape_rows,
        u95_clamped: radicand < 0.0,
        issues,
    })
}

/// Metrics over target triples in the given scope.
pub fn compute_metrics(
    actual: &[TargetTriple],
    predicted: &[TargetTriple],
    scope: Scope,
) -> Result<MetricReport, MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let series = |rows: &[TargetTriple]| -> Vec<f64> {
        rows.iter()
            .map(|t| match scope {
                Scope::Aggregate => t.mean(),
                Scope::PerOutput(o) => t.get(o),
            })
            .collect()
    };
    compute_series(&series(actual), &series(predicted), scope)
}
