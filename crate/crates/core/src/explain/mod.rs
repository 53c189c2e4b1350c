//! Shapley-value attributions for any model with a fixed input width.

mod importance;
mod shapley;

use rand::seq::index::sample;
use serde::Serialize;
use thiserror::Error;

pub use self::importance::{
    bar_chart, explanations_csv, global_importance, global_importance_with_groups, FeatureGroups, GlobalImportance,
    Method,
};
pub use self::shapley::{
    shap_exact, shap_exact_all, shap_sampled, shap_sampled_all, ShapExplanation, MAX_EXACT_FEATURES,
};

use crate::data::{Dataset, NUM_FEATURES, NUM_OUTPUTS};
use crate::learners::TrainedModel;
use crate::rng;

/// Rows drawn from the training set when no background size is given.
pub const DEFAULT_BACKGROUND_SIZE: usize = 64;
pub const MAX_BACKGROUND_SIZE: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("exact enumeration supports at most {max} features, the model has {n}")]
    TooManyFeatures { n: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("background set holds {n} rows, the limit is {max}")]
    BackgroundTooLarge { n: usize, max: usize },
    #[error("expected {expected} features, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("output {output} out of range for a model with {n_outputs} outputs")]
    OutputOutOfRange { output: usize, n_outputs: usize },
    #[error("at least one permutation is required")]
    NoPermutations,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
}

/// Anything that maps a fixed-width row to a fixed number of outputs.
pub trait Model: Sync {
    fn n_features(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Vec<f64>;
}

impl Model for TrainedModel {
    fn n_features(&self) -> usize {
        NUM_FEATURES
    }

    fn n_outputs(&self) -> usize {
        NUM_OUTPUTS
    }

    fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.predict_array(x).to_vec()
    }
}

/// A model given by a closure.
pub struct FnModel<F> {
    n_features: usize,
    n_outputs: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> FnModel<F> {
    pub fn new(n_features: usize, n_outputs: usize, f: F) -> Self {
        FnModel { n_features, n_outputs, f }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64> + Sync> Model for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Reference rows standing in for absent features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundSet {
    rows: Vec<Vec<f64>>,
}

impl BackgroundSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ExplainError> {
        let width = rows.first().ok_or(ExplainError::EmptyBackground)?.len();
        if rows.len() > MAX_BACKGROUND_SIZE {
            return Err(ExplainError::BackgroundTooLarge {
                n: rows.len(),
                max: MAX_BACKGROUND_SIZE,
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(ExplainError::WidthMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        Ok(BackgroundSet { rows })
    }

    /// `size` rows of `data` drawn without replacement (all rows if fewer).
    pub fn sample(data: &Dataset, size: usize, seed: u64) -> Result<Self, ExplainError> {
        let n = data.len();
        if n == 0 || size == 0 {
            return Err(ExplainError::EmptyBackground);
        }
        let features = data.features();
        let mut picked = sample(&mut rng::rng(seed), n, size.min(n)).into_vec();
        picked.sort_unstable();
        BackgroundSet::new(picked.into_iter().map(|i| features[i].0.to_vec()).collect())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }
}
