//! Copeland pairwise ranking of models over several metrics.
//!
//! For every unordered pair of models and every metric, the better model
//! scores +1 and the worse −1 (0 on an exact tie). A model's Copeland score
//! sums these over all pairs and metrics. Within a pair, the model with the
//! higher metric-sum takes a win and the other a loss; equal sums are neither.
//! Ranking is by score, then wins, then lower RMSE; models equal on all three
//! share the better rank. NaN metric values lose to any number.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use super::metrics::{MetricReport, Scope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("ranking needs at least two models, got {0}")]
    FewerThanTwoModels(usize),
    #[error("models were evaluated in different scopes")]
    InconsistentScopes,
    #[error("{names} names for {reports} reports")]
    RaggedMatrix { names: usize, reports: usize },
    #[error("no metrics selected")]
    NoMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Metric {
    Rmse,
    Mae,
    Mape,
    Si,
    U95,
    R2,
    Nse,
}

impl Metric {
    /// The seven metrics in results-table column order.
    pub const ALL: [Metric; 7] = [
        Metric::Rmse,
        Metric::Mae,
        Metric::Mape,
        Metric::Si,
        Metric::U95,
        Metric::R2,
        Metric::Nse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::Mae => "MAE",
            Metric::Mape => "MAPE",
            Metric::Si => "SI",
            Metric::U95 => "U95",
            Metric::R2 => "R2",
            Metric::Nse => "NSE",
        }
    }

    pub fn parse(name: &str) -> Option<Metric> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::R2 | Metric::Nse)
    }

    pub fn value(self, r: &MetricReport) -> f64 {
        match self {
            Metric::Rmse => r.rmse,
            Metric::Mae => r.mae,
            Metric::Mape => r.mape,
            Metric::Si => r.si,
            Metric::U95 => r.u95,
            Metric::R2 => r.r2,
            Metric::Nse => r.nse,
        }
    }

    /// +1 if `a` beats `b`, −1 if it loses, 0 on a tie.
    pub fn compare(self, a: f64, b: f64) -> i64 {
        let ord = match (a.is_nan(), b.is_nan()) {
            (true, true) => return 0,
            (true, false) => return -1,
            (false, true) => return 1,
            _ => a.partial_cmp(&b).expect("non-NaN"),
        };
        let better = if self.higher_is_better() {
            Ordering::Greater
        } else {
            Ordering::Less
        };
        match ord {
            Ordering::Equal => 0,
            o if o == better => 1,
            _ => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    pub names: Vec<String>,
    pub reports: Vec<MetricReport>,
    pub metrics: Vec<Metric>,
}

impl ComparisonMatrix {
    /// All seven metrics.
    pub fn new(names: Vec<String>, reports: Vec<MetricReport>) -> Self {
        ComparisonMatrix {
            names,
            reports,
            metrics: Metric::ALL.to_vec(),
        }
    }

    pub fn with_metrics(mut self, metrics: Vec<Metric>) -> Self {
        self.metrics = metrics;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopelandEntry {
    pub name: String,
    pub score: i64,
    pub wins: usize,
    pub losses: usize,
    pub rank: usize,
    /// Another model has the same Copeland score.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopelandResult {
    /// In the input model order.
    pub entries: Vec<CopelandEntry>,
    /// `pairwise[i][j]`: model i's metric-sum against model j.
    pub pairwise: Vec<Vec<i64>>,
}

impl CopelandResult {
    pub fn get(&self, name: &str) -> Option<&CopelandEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Entries sorted by rank, then name.
    pub fn ranked(&self) -> Vec<&CopelandEntry> {
        let mut v: Vec<&CopelandEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.name.cmp(&b.name)));
        v
    }
}

pub fn copeland_rank(matrix: &ComparisonMatrix) -> Result<CopelandResult, RankError> {
    let n = matrix.reports.len();
    if matrix.names.len() != n {
        return Err(RankError::RaggedMatrix {
            names: matrix.names.len(),
            reports: n,
        });
    }
    if n < 2 {
        return Err(RankError::FewerThanTwoModels(n));
    }
    if matrix.metrics.is_empty() {
        return Err(RankError::NoMetrics);
    }
    let scope: Scope = matrix.reports[0].scope;
    if matrix.reports.iter().any(|r| r.scope != scope) {
        return Err(RankError::InconsistentScopes);
    }

    let mut pairwise = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s: i64 = matrix
                .metrics
                .iter()
                .map(|m| m.compare(m.value(&matrix.reports[i]), m.value(&matrix.reports[j])))
                .sum();
            pairwise[i][j] = s;
            pairwise[j][i] = -s;
        }
    }

    let mut entries: Vec<CopelandEntry> = (0..n)
        .map(|i| CopelandEntry {
            name: matrix.names[i].clone(),
            score: pairwise[i].iter().sum(),
            wins: pairwise[i].iter().filter(|&&s| s > 0).count(),
            losses: pairwise[i].iter().filter(|&&s| s < 0).count(),
            rank: 0,
            tied: false,
        })
        .collect();

    let key = |i: usize| (entries[i].score, entries[i].wins, matrix.reports[i].rmse);
    let order_by_key = |a: usize, b: usize| {
        let (sa, wa, ra) = key(a);
        let (sb, wb, rb) = key(b);
        sb.cmp(&sa).then(wb.cmp(&wa)).then(ra.total_cmp(&rb))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| order_by_key(a, b).then_with(|| matrix.names[a].cmp(&matrix.names[b])));

    let mut ranks = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && order_by_key(order[pos - 1], i) == Ordering::Equal {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    let scores: Vec<i64> = entries.iter().map(|e| e.score).collect();
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = ranks[i];
        e.tied = scores.iter().enumerate().any(|(j, &s)| j != i && s == e.score);
    }
    Ok(CopelandResult { entries, pairwise })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(values: [f64; 7]) -> MetricReport {
        MetricReport::from_values(values)
    }

    #[test]
    fn domination_gives_full_margin() {
        let a = report([1.0, 1.0, 0.1, 0.1, 1.0, 0.99, 0.98]);
        let b = report([2.0, 2.0, 0.2, 0.2, 2.0, 0.90, 0.80]);
        let r = copeland_rank(&ComparisonMatrix::new(vec!["A".into(), "B".into()], vec![a, b])).unwrap();
        assert_eq!((r.entries[0].score, r.entries[0].wins, r.entries[0].losses, r.entries[0].rank), (7, 1, 0, 1));
        assert_eq!((r.entries[1].score, r.entries[1].wins, r.entries[1].losses, r.entries[1].rank), (-7, 0, 1, 2));
    }

    #[test]
    fn identical_reports_share_rank_one() {
        let a = report([1.0, 1.0, 0.1, 0.1, 1.0, 0.99, 0.98]);
        let r = copeland_rank(&ComparisonMatrix::new(vec!["A".into(), "B".into()], vec![a.clone(), a])).unwrap();
        for e in &r.entries {
            assert_eq!((e.score, e.wins, e.losses, e.rank, e.tied), (0, 0, 0, 1, true));
        }
    }

    #[test]
    fn metric_subset_changes_scores() {
        let a = report([1.0, 2.0, 0.1, 0.1, 1.0, 0.99, 0.98]);
        let b = report([2.0, 1.0, 0.2, 0.2, 2.0, 0.90, 0.80]);
        let m = ComparisonMatrix::new(vec!["A".into(), "B".into()], vec![a, b])
            .with_metrics(vec![Metric::Rmse, Metric::Mae]);
        let r = copeland_rank(&m).unwrap();
        assert_eq!(r.entries[0].score, 0);
        assert_eq!(r.entries[0].wins, 0);
    }

    #[test]
    fn nan_loses() {
        assert_eq!(Metric::Rmse.compare(f64::NAN, 1.0), -1);
        assert_eq!(Metric::R2.compare(0.5, f64::NAN), 1);
        assert_eq!(Metric::R2.compare(f64::NAN, f64::NAN), 0);
        assert_eq!(Metric::R2.compare(0.9, 0.8), 1);
        assert_eq!(Metric::Mae.compare(0.9, 0.8), -1);
    }

    #[test]
    fn errors() {
        let a = report([1.0; 7]);
        assert_eq!(
            copeland_rank(&ComparisonMatrix::new(vec!["A".into()], vec![a.clone()])),
            Err(RankError::FewerThanTwoModels(1))
        );
        let mut b = a.clone();
        b.scope = Scope::PerOutput(crate::data::Output::Reuse);
        assert_eq!(
            copeland_rank(&ComparisonMatrix::new(vec!["A".into(), "B".into()], vec![a, b])),
            Err(RankError::InconsistentScopes)
        );
    }
}
