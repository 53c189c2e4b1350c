use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{grow, FeatureSampler, RegressionTree, TreeParams};
use super::split::{Presorted, Row};
use super::LearnError;
use crate::data::{NUM_FEATURES, NUM_OUTPUTS};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree: TreeParams,
    pub n_trees: usize,
    /// Features eligible at each node, drawn uniformly without replacement.
    pub features_per_split: usize,
    /// Fit each tree on a bootstrap resample; otherwise on the full set.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree: TreeParams::default(),
            n_trees: 100,
            features_per_split: NUM_FEATURES.div_ceil(3),
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        self.tree.validate()?;
        if self.n_trees == 0 {
            return Err(LearnError::InvalidParams("n_trees must be at least 1".into()));
        }
        if !(1..=NUM_FEATURES).contains(&self.features_per_split) {
            return Err(LearnError::InvalidParams(format!(
                "features_per_split must lie in [1, {NUM_FEATURES}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<RegressionTree>,
}

impl ForestModel {
    pub(crate) fn fit(
        x: &[Row],
        y: &[[f64; NUM_OUTPUTS]],
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self, LearnError> {
        params.validate()?;
        if x.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let presorted = Presorted::new(x);
        let n = x.len();
        // Tree i draws from its own stream, so parallel and sequential fits agree.
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::child_rng(seed, i as u64);
                let mut multiplicity = vec![0u32; n];
                if params.bootstrap {
                    for _ in 0..n {
                        multiplicity[rng.random_range(0..n)] += 1;
                    }
                } else {
                    multiplicity.fill(1);
                }
                let mut sampler = FeatureSampler {
                    per_split: params.features_per_split,
                    rng: &mut rng,
                };
                grow(x, y, &presorted, &multiplicity, &params.tree, &mut sampler)
            })
            .collect();
        Ok(ForestModel {
            params: *params,
            seed,
            trees,
        })
    }

    /// Componentwise mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        let mut sum = [0.0; NUM_OUTPUTS];
        for tree in &self.trees {
            let p = tree.predict(x);
            for k in 0..NUM_OUTPUTS {
                sum[k] += p[k];
            }
        }
        let n = self.trees.len() as f64;
        sum.map(|s| s / n)
    }
}
