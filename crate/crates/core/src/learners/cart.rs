//! Variance-reduction regression trees with vector-valued leaves.
//!
//! A split minimizes the size-weighted sum of child variances, summed over
//! the three outputs. Equivalently it maximizes the drop in total squared
//! error, which is what [`VarianceCriterion`] scores.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, Criterion, NodeRows, Presorted, Row, ALL_FEATURES};
use super::tree::{Node, Tree};
use super::LearnError;
use crate::data::{NUM_FEATURES, NUM_OUTPUTS};

pub type RegressionTree = Tree<[f64; NUM_OUTPUTS]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 500,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(LearnError::InvalidParams(what.to_string()))
            }
        };
        check((1..=500).contains(&self.max_depth), "max_depth must lie in [1, 500]")?;
        check(
            (2..=20).contains(&self.min_samples_split),
            "min_samples_split must lie in [2, 20]",
        )?;
        check(
            (1..=20).contains(&self.min_samples_leaf),
            "min_samples_leaf must lie in [1, 20]",
        )
    }
}

#[derive(Clone, Copy)]
pub(crate) struct VarAcc {
    n: usize,
    sum: [f64; NUM_OUTPUTS],
    sum_sq: [f64; NUM_OUTPUTS],
}

impl VarAcc {
    fn sse(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let n = self.n as f64;
        (0..NUM_OUTPUTS)
            .map(|k| (self.sum_sq[k] - self.sum[k] * self.sum[k] / n).max(0.0))
            .sum()
    }
}

/// Squared-error reduction on targets centered at the node mean.
pub(crate) struct VarianceCriterion<'a> {
    y: &'a [[f64; NUM_OUTPUTS]],
    center: [f64; NUM_OUTPUTS],
    min_leaf: usize,
}

impl Criterion for VarianceCriterion<'_> {
    type Acc = VarAcc;

    fn empty(&self) -> VarAcc {
        VarAcc {
            n: 0,
            sum: [0.0; NUM_OUTPUTS],
            sum_sq: [0.0; NUM_OUTPUTS],
        }
    }

    fn add(&self, acc: &mut VarAcc, row: usize) {
        acc.n += 1;
        for k in 0..NUM_OUTPUTS {
            let d = self.y[row][k] - self.center[k];
            acc.sum[k] += d;
            acc.sum_sq[k] += d * d;
        }
    }

    fn remainder(&self, parent: &VarAcc, left: &VarAcc) -> VarAcc {
        VarAcc {
            n: parent.n - left.n,
            sum: [0, 1, 2].map(|k| parent.sum[k] - left.sum[k]),
            sum_sq: [0, 1, 2].map(|k| parent.sum_sq[k] - left.sum_sq[k]),
        }
    }

    fn admissible(&self, left: &VarAcc, right: &VarAcc) -> bool {
        left.n >= self.min_leaf && right.n >= self.min_leaf
    }

    fn gain(&self, parent: &VarAcc, left: &VarAcc, right: &VarAcc) -> f64 {
        parent.sse() - left.sse() - right.sse()
    }
}

pub(crate) fn leaf_mean(y: &[[f64; NUM_OUTPUTS]], rows: &[u32]) -> [f64; NUM_OUTPUTS] {
    let mut sum = [0.0; NUM_OUTPUTS];
    for &r in rows {
        for k in 0..NUM_OUTPUTS {
            sum[k] += y[r as usize][k];
        }
    }
    let n = rows.len() as f64;
    sum.map(|s| s / n)
}

/// How many features each node may consider, and the stream drawing them.
pub(crate) struct FeatureSampler<'r, R: Rng> {
    pub per_split: usize,
    pub rng: &'r mut R,
}

impl<R: Rng> FeatureSampler<'_, R> {
    fn draw(&mut self) -> Vec<usize> {
        if self.per_split >= NUM_FEATURES {
            return ALL_FEATURES.to_vec();
        }
        let mut f = index::sample(self.rng, NUM_FEATURES, self.per_split).into_vec();
        f.sort_unstable();
        f
    }
}

/// Grows a tree on the row multiset given by `multiplicity`.
pub(crate) fn grow<R: Rng>(
    x: &[Row],
    y: &[[f64; NUM_OUTPUTS]],
    presorted: &Presorted,
    multiplicity: &[u32],
    params: &TreeParams,
    sampler: &mut FeatureSampler<'_, R>,
) -> RegressionTree {
    let mut nodes = Vec::new();
    build(x, y, presorted.lists(multiplicity), 0, params, sampler, &mut nodes);
    Tree { nodes }
}

fn build<R: Rng>(
    x: &[Row],
    y: &[[f64; NUM_OUTPUTS]],
    node: NodeRows,
    depth: usize,
    params: &TreeParams,
    sampler: &mut FeatureSampler<'_, R>,
    nodes: &mut Vec<Node<[f64; NUM_OUTPUTS]>>,
) -> usize {
    let at = nodes.len();
    let rows = node.rows();
    let n = rows.len();
    let value = leaf_mean(y, rows);
    let pure = rows.iter().all(|&r| y[r as usize] == y[rows[0] as usize]);
    let leaf = Node::Leaf {
        value,
        n_samples: n,
    };
    if pure
        || depth >= params.max_depth
        || n < params.min_samples_split
        || n < 2 * params.min_samples_leaf
    {
        nodes.push(leaf);
        return at;
    }
    let criterion = VarianceCriterion {
        y,
        center: value,
        min_leaf: params.min_samples_leaf,
    };
    let features = sampler.draw();
    let Some(split) = best_split(&criterion, &node, x, &features) else {
        nodes.push(leaf);
        return at;
    };
    nodes.push(Node::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let (left_rows, right_rows) = node.partition(x, split.feature, split.threshold);
    let left = build(x, y, left_rows, depth + 1, params, sampler, nodes);
    let right = build(x, y, right_rows, depth + 1, params, sampler, nodes);
    if let Node::Internal {
        left: l, right: r, ..
    } = &mut nodes[at]
    {
        *l = left;
        *r = right;
    }
    at
}

/// A single decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub params: TreeParams,
    pub tree: RegressionTree,
}

impl DecisionTreeModel {
    pub(crate) fn fit(x: &[Row], y: &[[f64; NUM_OUTPUTS]], params: &TreeParams) -> Result<Self, LearnError> {
        params.validate()?;
        if x.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let presorted = Presorted::new(x);
        // The feature sampler never draws when every feature is eligible.
        let mut unused = crate::rng::rng(0);
        let mut sampler = FeatureSampler {
            per_split: NUM_FEATURES,
            rng: &mut unused,
        };
        let tree = grow(x, y, &presorted, &vec![1; x.len()], params, &mut sampler);
        Ok(DecisionTreeModel {
            params: *params,
            tree,
        })
    }

    pub fn predict(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        *self.tree.predict(x)
    }
}
