//! K-nearest-neighbour regression on standardized features.

use serde::{Deserialize, Serialize};

use super::split::Row;
use super::LearnError;
use crate::data::{NUM_FEATURES, NUM_OUTPUTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
    /// Minkowski power, `p >= 1`.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            weighting: Weighting::Uniform,
            p: 2.0,
        }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.k == 0 {
            return Err(LearnError::InvalidParams("k must be at least 1".into()));
        }
        if !(self.p.is_finite() && self.p >= 1.0) {
            return Err(LearnError::InvalidParams("p must be a finite value >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    /// Multiplied into each feature before measuring distance.
    pub scale: [f64; NUM_FEATURES],
    pub train_x: Vec<Row>,
    pub train_y: Vec<[f64; NUM_OUTPUTS]>,
}

/// `1 / population std` per column, 1 for constant columns.
pub(crate) fn inverse_std(x: &[Row]) -> [f64; NUM_FEATURES] {
    let n = x.len() as f64;
    let mut scale = [1.0; NUM_FEATURES];
    for (f, s) in scale.iter_mut().enumerate() {
        let mean = x.iter().map(|r| r[f]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 && std.is_finite() {
            *s = 1.0 / std;
        }
    }
    scale
}

pub(crate) fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    } else {
        a.iter()
            .zip(b)
            .map(|(u, v)| (u - v).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

impl KnnModel {
    pub(crate) fn fit(x: &[Row], y: &[[f64; NUM_OUTPUTS]], params: &KnnParams) -> Result<Self, LearnError> {
        params.validate()?;
        if x.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        if params.k > x.len() {
            return Err(LearnError::KTooLarge {
                k: params.k,
                n: x.len(),
            });
        }
        let scale = inverse_std(x);
        let train_x = x
            .iter()
            .map(|r| std::array::from_fn(|f| r[f] * scale[f]))
            .collect();
        Ok(KnnModel {
            params: *params,
            scale,
            train_x,
            train_y: y.to_vec(),
        })
    }

    fn scaled(&self, x: &[f64]) -> Row {
        std::array::from_fn(|f| x[f] * self.scale[f])
    }

    /// The k nearest training rows with their distances, nearest first; equal
    /// distances are ordered by row index.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let q = self.scaled(x);
        let mut all: Vec<(usize, f64)> = self
            .train_x
            .iter()
            .enumerate()
            .map(|(i, r)| (i, minkowski(&q, r, self.params.p)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        let k = self.params.k.min(all.len());
        if k < all.len() {
            all.select_nth_unstable_by(k - 1, cmp);
            all.truncate(k);
        }
        all.sort_by(cmp);
        all
    }

    pub fn predict(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        let nn = self.neighbors(x);
        let mut sum = [0.0; NUM_OUTPUTS];
        let mut total = 0.0;
        let exact: Vec<usize> = nn.iter().filter(|(_, d)| *d == 0.0).map(|(i, _)| *i).collect();
        let weighted: Vec<(usize, f64)> = match self.params.weighting {
            Weighting::Uniform => nn.iter().map(|&(i, _)| (i, 1.0)).collect(),
            // A neighbour at distance zero dominates: average the exact matches.
            Weighting::Distance if !exact.is_empty() => exact.iter().map(|&i| (i, 1.0)).collect(),
            Weighting::Distance => nn.iter().map(|&(i, d)| (i, 1.0 / d)).collect(),
        };
        for (i, w) in weighted {
            total += w;
            for k in 0..NUM_OUTPUTS {
                sum[k] += w * self.train_y[i][k];
            }
        }
        sum.map(|s| s / total)
    }
}
