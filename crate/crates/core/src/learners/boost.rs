//! Second-order gradient boosting on squared error.
//!
//! Each of the three outputs gets its own additive ensemble; the stage loop,
//! parameters and seeds are shared. Per stage and output, with prediction
//! `F`, gradients are `g = F - y` and hessians `h = 1`. For a node with
//! gradient sum `G` and hessian sum `H`, using soft-thresholding
//! `T(G) = sign(G) max(|G| - alpha, 0)`:
//!
//! ```text
//! leaf weight = -T(G) / (H + lambda)
//! split gain  = 1/2 [T(G_L)^2/(H_L + lambda) + T(G_R)^2/(H_R + lambda) - T(G)^2/(H + lambda)]
//! ```
//!
//! Trees grow either level-wise (every node with positive gain splits until
//! `max_depth`) or leaf-wise (repeatedly split the leaf of maximal gain until
//! the leaf budget or `max_depth`). Leaf-wise training can add gradient-based
//! one-side sampling: keep the top `a` fraction of rows by |g|, draw a `b`
//! fraction of the rest, and amplify the drawn rows by `(1 - a) / b`.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{best_split, Criterion, NodeRows, Presorted, Row, Split, ALL_FEATURES};
use super::tree::{Node, Tree};
use super::LearnError;
use crate::data::NUM_OUTPUTS;
use crate::rng;

pub type BoostTree = Tree<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Growth {
    LevelWise,
    LeafWise {
        max_leaves: usize,
        goss: Option<Goss>,
    },
}

/// One-side sampling fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goss {
    /// Fraction of rows kept by largest |gradient|.
    pub top_rate: f64,
    /// Fraction of rows drawn from the remainder.
    pub other_rate: f64,
}

impl Default for Goss {
    fn default() -> Self {
        Goss {
            top_rate: 0.2,
            other_rate: 0.1,
        }
    }
}

impl Goss {
    pub fn validate(&self) -> Result<(), LearnError> {
        let (a, b) = (self.top_rate, self.other_rate);
        let ok = a > 0.0 && a <= 1.0 && (0.0..=1.0).contains(&b) && (a >= 1.0 || a + b <= 1.0);
        if ok {
            Ok(())
        } else {
            Err(LearnError::InvalidGossFractions { a, b })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub max_depth: usize,
    /// L1 penalty on leaf gradient sums.
    pub alpha: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Row fraction drawn without replacement per stage.
    pub subsample: f64,
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub growth: Growth,
}

impl BoostParams {
    pub fn level_wise() -> Self {
        BoostParams {
            max_depth: 6,
            alpha: 0.0,
            lambda: 1.0,
            subsample: 1.0,
            n_estimators: 100,
            learning_rate: 0.1,
            growth: Growth::LevelWise,
        }
    }

    pub fn leaf_wise() -> Self {
        BoostParams {
            max_depth: 500,
            growth: Growth::LeafWise {
                max_leaves: 31,
                goss: Some(Goss::default()),
            },
            ..BoostParams::level_wise()
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let invalid = |m: &str| Err(LearnError::InvalidParams(m.to_string()));
        if !(1..=500).contains(&self.max_depth) {
            return invalid("max_depth must lie in [1, 500]");
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return invalid("alpha must be non-negative");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return invalid("lambda must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return invalid("subsample must lie in (0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return invalid("learning_rate must be positive");
        }
        if let Growth::LeafWise { max_leaves, goss } = self.growth {
            if max_leaves < 2 {
                return invalid("max_leaves must be at least 2");
            }
            if let Some(g) = goss {
                g.validate()?;
            }
        }
        Ok(())
    }
}

fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
pub(crate) struct GradAcc {
    n: usize,
    g: f64,
    h: f64,
}

pub(crate) struct GradientCriterion<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub alpha: f64,
    pub lambda: f64,
}

impl GradientCriterion<'_> {
    fn score(&self, acc: &GradAcc) -> f64 {
        let t = soft_threshold(acc.g, self.alpha);
        t * t / (acc.h + self.lambda)
    }

    pub(crate) fn weight(&self, acc: &GradAcc) -> f64 {
        let denom = acc.h + self.lambda;
        if denom > 0.0 {
            -soft_threshold(acc.g, self.alpha) / denom
        } else {
            0.0
        }
    }
}

impl Criterion for GradientCriterion<'_> {
    type Acc = GradAcc;

    fn empty(&self) -> GradAcc {
        GradAcc { n: 0, g: 0.0, h: 0.0 }
    }

    fn add(&self, acc: &mut GradAcc, row: usize) {
        acc.n += 1;
        acc.g += self.grad[row];
        acc.h += self.hess[row];
    }

    fn remainder(&self, parent: &GradAcc, left: &GradAcc) -> GradAcc {
        GradAcc {
            n: parent.n - left.n,
            g: parent.g - left.g,
            h: parent.h - left.h,
        }
    }

    fn admissible(&self, left: &GradAcc, right: &GradAcc) -> bool {
        left.n > 0 && right.n > 0 && left.h > 0.0 && right.h > 0.0
    }

    fn gain(&self, parent: &GradAcc, left: &GradAcc, right: &GradAcc) -> f64 {
        0.5 * (self.score(left) + self.score(right) - self.score(parent))
    }
}

struct Frontier {
    arena_index: usize,
    rows: NodeRows,
    depth: usize,
    split: Split,
}

/// Grows one gradient tree; `max_leaves = None` means level-wise growth.
pub(crate) fn grow_gradient_tree(
    x: &[Row],
    presorted: &Presorted,
    multiplicity: &[u32],
    criterion: &GradientCriterion<'_>,
    max_depth: usize,
    max_leaves: Option<usize>,
) -> BoostTree {
    let find = |rows: &NodeRows, depth: usize| {
        if depth >= max_depth || rows.len() < 2 {
            None
        } else {
            best_split(criterion, rows, x, &ALL_FEATURES)
        }
    };
    let leaf_of = |rows: &NodeRows| {
        let acc = criterion.total(rows.rows());
        Node::Leaf {
            value: criterion.weight(&acc),
            n_samples: rows.len(),
        }
    };

    let root = presorted.lists(multiplicity);
    let mut arena = vec![leaf_of(&root)];
    // Only splittable leaves are kept; the rest are final.
    let mut frontier: Vec<Frontier> = find(&root, 0)
        .map(|split| Frontier {
            arena_index: 0,
            rows: root,
            depth: 0,
            split,
        })
        .into_iter()
        .collect();
    let mut leaves = 1usize;

    loop {
        if max_leaves.is_some_and(|budget| leaves >= budget) {
            break;
        }
        // Level-wise: first splittable node in creation (breadth-first) order.
        // Leaf-wise: the node of maximal gain, earliest on ties.
        if frontier.is_empty() {
            break;
        }
        let i = match max_leaves {
            None => 0,
            Some(_) => {
                let mut best = 0;
                for (i, f) in frontier.iter().enumerate() {
                    if f.split.gain > frontier[best].split.gain {
                        best = i;
                    }
                }
                best
            }
        };
        let node = frontier.remove(i);
        let split = node.split;
        let (left_rows, right_rows) = node.rows.partition(x, split.feature, split.threshold);
        let (l, r) = (arena.len(), arena.len() + 1);
        arena.push(leaf_of(&left_rows));
        arena.push(leaf_of(&right_rows));
        arena[node.arena_index] = Node::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        leaves += 1;
        for (arena_index, rows) in [(l, left_rows), (r, right_rows)] {
            if let Some(split) = find(&rows, node.depth + 1) {
                frontier.push(Frontier {
                    arena_index,
                    rows,
                    depth: node.depth + 1,
                    split,
                });
            }
        }
    }
    Tree { nodes: arena }.into_preorder()
}

/// Row weights for one stage: subsample without replacement, then optional
/// one-side sampling on the drawn rows. Returns (multiplicity, weight).
fn stage_sample(
    grad: &[f64],
    params: &BoostParams,
    seed: u64,
) -> (Vec<u32>, Vec<f64>) {
    let n = grad.len();
    let mut rng = rng::rng(seed);
    let mut bag: Vec<usize> = if params.subsample < 1.0 {
        let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let mut v = index::sample(&mut rng, n, m).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let mut multiplicity = vec![0u32; n];
    let mut weight = vec![0.0; n];

    let goss = match params.growth {
        Growth::LeafWise { goss: Some(g), .. } if g.top_rate < 1.0 => Some(g),
        _ => None,
    };
    match goss {
        None => {
            for &r in &bag {
                multiplicity[r] = 1;
                weight[r] = 1.0;
            }
        }
        Some(g) => {
            let m = bag.len();
            bag.sort_by(|&a, &b| grad[b].abs().total_cmp(&grad[a].abs()).then(a.cmp(&b)));
            let top = ((g.top_rate * m as f64).round() as usize).min(m);
            let rest = &bag[top..];
            let other = ((g.other_rate * m as f64).round() as usize).min(rest.len());
            for &r in &bag[..top] {
                multiplicity[r] = 1;
                weight[r] = 1.0;
            }
            if other > 0 {
                let amplify = (1.0 - g.top_rate) / g.other_rate;
                for j in index::sample(&mut rng, rest.len(), other) {
                    let r = rest[j];
                    multiplicity[r] = 1;
                    weight[r] = amplify;
                }
            }
        }
    }
    (multiplicity, weight)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub params: BoostParams,
    pub seed: u64,
    /// Per-output training mean.
    pub base_score: [f64; NUM_OUTPUTS],
    /// `trees[k]` is the stage sequence for output k.
    pub trees: Vec<Vec<BoostTree>>,
}

/// Training squared loss per output after each stage (index 0 = base score only).
pub type LossCurve = Vec<[f64; NUM_OUTPUTS]>;

impl BoostedEnsemble {
    pub(crate) fn fit(
        x: &[Row],
        y: &[[f64; NUM_OUTPUTS]],
        params: &BoostParams,
        seed: u64,
    ) -> Result<(Self, LossCurve), LearnError> {
        params.validate()?;
        if x.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        let presorted = Presorted::new(x);
        let n = x.len();
        let max_leaves = match params.growth {
            Growth::LevelWise => None,
            Growth::LeafWise { max_leaves, .. } => Some(max_leaves),
        };

        let per_output: Vec<(f64, Vec<BoostTree>, Vec<f64>)> = (0..NUM_OUTPUTS)
            .into_par_iter()
            .map(|k| {
                let target: Vec<f64> = y.iter().map(|r| r[k]).collect();
                let base = target.iter().sum::<f64>() / n as f64;
                let mut pred = vec![base; n];
                let mut losses = vec![mse(&pred, &target)];
                let mut trees = Vec::with_capacity(params.n_estimators);
                let output_seed = rng::child_seed(seed, k as u64);
                for stage in 0..params.n_estimators {
                    let raw_grad: Vec<f64> = pred.iter().zip(&target).map(|(p, t)| p - t).collect();
                    let (multiplicity, weight) =
                        stage_sample(&raw_grad, params, rng::child_seed(output_seed, stage as u64));
                    let grad: Vec<f64> = raw_grad.iter().zip(&weight).map(|(g, w)| g * w).collect();
                    let criterion = GradientCriterion {
                        grad: &grad,
                        hess: &weight,
                        alpha: params.alpha,
                        lambda: params.lambda,
                    };
                    let tree = grow_gradient_tree(
                        x,
                        &presorted,
                        &multiplicity,
                        &criterion,
                        params.max_depth,
                        max_leaves,
                    );
                    for (p, row) in pred.iter_mut().zip(x) {
                        *p += params.learning_rate * tree.predict(row);
                    }
                    losses.push(mse(&pred, &target));
                    trees.push(tree);
                }
                (base, trees, losses)
            })
            .collect();

        let mut base_score = [0.0; NUM_OUTPUTS];
        let mut trees = Vec::with_capacity(NUM_OUTPUTS);
        let mut curve = vec![[0.0; NUM_OUTPUTS]; params.n_estimators + 1];
        for (k, (base, t, losses)) in per_output.into_iter().enumerate() {
            base_score[k] = base;
            trees.push(t);
            for (stage, loss) in losses.into_iter().enumerate() {
                curve[stage][k] = loss;
            }
        }
        Ok((
            BoostedEnsemble {
                params: *params,
                seed,
                base_score,
                trees,
            },
            curve,
        ))
    }

    pub fn predict(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        self.predict_staged(x, usize::MAX)
    }

    /// Prediction using only the first `stages` trees of each output.
    pub fn predict_staged(&self, x: &[f64], stages: usize) -> [f64; NUM_OUTPUTS] {
        std::array::from_fn(|k| {
            let mut p = self.base_score[k];
            for tree in self.trees[k].iter().take(stages) {
                p += self.params.learning_rate * tree.predict(x);
            }
            p
        })
    }

    pub fn n_stages(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }
}

fn mse(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}
