use std::fmt;

use serde::Serialize;

use super::{DataError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnStats {
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> ColumnStats {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        // Summation can push the mean an ulp outside the range on constant columns.
        ColumnStats {
            mean: mean.clamp(min, max),
            std: var.sqrt(),
            min,
            max,
        }
    }
}

/// Per-column summary in the layout of a descriptive-analysis table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub gfa: ColumnStats,
    pub volume: ColumnStats,
    pub levels: ColumnStats,
    pub recycle: ColumnStats,
    pub reuse: ColumnStats,
    pub landfill: ColumnStats,
}

impl DescriptiveStats {
    pub fn columns(&self) -> [(&'static str, &ColumnStats); 6] {
        [
            ("GFA", &self.gfa),
            ("Volume", &self.volume),
            ("Number of levels", &self.levels),
            ("Recyclable material", &self.recycle),
            ("Reusable materials", &self.reuse),
            ("Landfill materials", &self.landfill),
        ]
    }
}

impl fmt::Display for DescriptiveStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22}{:>12}{:>20}{:>16}{:>16}",
            "Factor", "Mean", "Standard deviation", "Minimum value", "Maximum value"
        )?;
        for (name, c) in self.columns() {
            writeln!(
                f,
                "{:<22}{:>12.2}{:>20.2}{:>16.2}{:>16.2}",
                name, c.mean, c.std, c.min, c.max
            )?;
        }
        write!(f, "({} records)", self.n)
    }
}

pub fn summarize(dataset: &Dataset) -> Result<DescriptiveStats, DataError> {
    dataset.require_non_empty()?;
    let rows = &dataset.records;
    Ok(DescriptiveStats {
        n: rows.len(),
        gfa: ColumnStats::of(rows.iter().map(|(r, _)| r.gfa)),
        volume: ColumnStats::of(rows.iter().map(|(r, _)| r.volume)),
        levels: ColumnStats::of(rows.iter().map(|(r, _)| f64::from(r.levels))),
        recycle: ColumnStats::of(rows.iter().map(|(_, t)| t.recycle)),
        reuse: ColumnStats::of(rows.iter().map(|(_, t)| t.reuse)),
        landfill: ColumnStats::of(rows.iter().map(|(_, t)| t.landfill)),
    })
}
