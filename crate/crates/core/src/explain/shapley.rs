//! Interventional Shapley values.
//!
//! The value of a coalition `S` is the model output averaged over the
//! background rows, with features in `S` taken from the explained instance
//! and the rest from the background row:
//!
//! ```text
//! phi_j = Σ_{S ⊆ N∖{j}} |S|! (|N|-|S|-1)! / |N|! · (v(S ∪ {j}) - v(S))
//! ```
//!
//! The exact method evaluates this per background row. Features on which the
//! instance and the row agree are null players of that row's game, so only
//! the differing features are enumerated.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::{BackgroundSet, ExplainError, Model};
use crate::rng;

/// Largest feature count the exact enumerator accepts.
pub const MAX_EXACT_FEATURES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapExplanation {
    pub output: usize,
    pub phi: Vec<f64>,
    /// Mean model output over the background set.
    pub baseline: f64,
    pub prediction: f64,
    /// Per-feature standard errors, sampled method only.
    pub std_errors: Option<Vec<f64>>,
    /// The sampled estimate had its residual spread across the features.
    pub renormalized: bool,
}

impl ShapExplanation {
    /// `prediction - baseline - Σ phi`.
    pub fn residual(&self) -> f64 {
        self.prediction - self.baseline - self.phi.iter().sum::<f64>()
    }
}

fn check_instance<M: Model + ?Sized>(model: &M, x: &[f64], bg: &BackgroundSet) -> Result<(), ExplainError> {
    let n = model.n_features();
    if x.len() != n {
        return Err(ExplainError::WidthMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if bg.width() != n {
        return Err(ExplainError::WidthMismatch {
            expected: n,
            found: bg.width(),
        });
    }
    Ok(())
}

fn check_output<M: Model + ?Sized>(model: &M, output: usize) -> Result<(), ExplainError> {
    if output >= model.n_outputs() {
        return Err(ExplainError::OutputOutOfRange {
            output,
            n_outputs: model.n_outputs(),
        });
    }
    Ok(())
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for i in 1..=n {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
}

/// Exact attributions for one background row, all outputs: `[output][feature]`.
fn exact_for_row<M: Model + ?Sized>(model: &M, x: &[f64], row: &[f64], ln_fact: &[f64]) -> Vec<Vec<f64>> {
    let n_out = model.n_outputs();
    let mut phi = vec![vec![0.0; x.len()]; n_out];
    let differing: Vec<usize> = (0..x.len()).filter(|&j| x[j] != row[j]).collect();
    let d = differing.len();
    if d == 0 {
        return phi;
    }
    let mut z = row.to_vec();
    let values: Vec<Vec<f64>> = (0..1usize << d)
        .map(|mask| {
            for (bit, &j) in differing.iter().enumerate() {
                z[j] = if mask >> bit & 1 == 1 { x[j] } else { row[j] };
            }
            model.predict(&z)
        })
        .collect();
    let weight: Vec<f64> = (0..d)
        .map(|s| (ln_fact[s] + ln_fact[d - s - 1] - ln_fact[d]).exp())
        .collect();
    for (bit, &j) in differing.iter().enumerate() {
        let with = 1usize << bit;
        for mask in 0..1usize << d {
            if mask & with != 0 {
                continue;
            }
            let w = weight[mask.count_ones() as usize];
            for o in 0..n_out {
                phi[o][j] += w * (values[mask | with][o] - values[mask][o]);
            }
        }
    }
    phi
}

fn baseline<M: Model + ?Sized>(model: &M, bg: &BackgroundSet) -> Vec<f64> {
    let mut sum = vec![0.0; model.n_outputs()];
    for row in bg.rows() {
        for (s, v) in sum.iter_mut().zip(model.predict(row)) {
            *s += v;
        }
    }
    sum.iter().map(|s| s / bg.len() as f64).collect()
}

/// Exact attributions for every output of the model.
pub fn shap_exact_all<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    bg: &BackgroundSet,
) -> Result<Vec<ShapExplanation>, ExplainError> {
    check_instance(model, x, bg)?;
    let n = x.len();
    if n > MAX_EXACT_FEATURES {
        return Err(ExplainError::TooManyFeatures {
            n,
            max: MAX_EXACT_FEATURES,
        });
    }
    let ln_fact = ln_factorials(n);
    let per_row: Vec<Vec<Vec<f64>>> = bg
        .rows()
        .par_iter()
        .map(|row| exact_for_row(model, x, row, &ln_fact))
        .collect();
    let base = baseline(model, bg);
    let prediction = model.predict(x);
    let m = bg.len() as f64;
    Ok((0..model.n_outputs())
        .map(|o| {
            let mut phi = vec![0.0; n];
            for row_phi in &per_row {
                for (p, v) in phi.iter_mut().zip(&row_phi[o]) {
                    *p += v;
                }
            }
            phi.iter_mut().for_each(|p| *p /= m);
            ShapExplanation {
                output: o,
                phi,
                baseline: base[o],
                prediction: prediction[o],
                std_errors: None,
                renormalized: false,
            }
        })
        .collect())
}

pub fn shap_exact<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    bg: &BackgroundSet,
    output: usize,
) -> Result<ShapExplanation, ExplainError> {
    check_output(model, output)?;
    Ok(shap_exact_all(model, x, bg)?.swap_remove(output))
}

/// Permutation estimator for every output. Each sampled feature order adds
/// the features of `x` one by one to every background row; a feature's
/// contribution is the mean output change when it enters. The estimate is
/// the mean over orders, with the standard error of that mean. Any residual
/// against `prediction - baseline` is spread over the features in proportion
/// to their sampling variance (evenly if all variances are zero).
pub fn shap_sampled_all<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    bg: &BackgroundSet,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<ShapExplanation>, ExplainError> {
    check_instance(model, x, bg)?;
    if n_permutations == 0 {
        return Err(ExplainError::NoPermutations);
    }
    let n = x.len();
    let n_out = model.n_outputs();
    let m = bg.len() as f64;

    // contributions[p][o][j] for permutation p
    let contributions: Vec<Vec<Vec<f64>>> = (0..n_permutations)
        .into_par_iter()
        .map(|p| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::child_rng(seed, p as u64));
            let mut c = vec![vec![0.0; n]; n_out];
            for row in bg.rows() {
                let mut z = row.to_vec();
                let mut prev = model.predict(&z);
                for &j in &order {
                    if z[j] == x[j] {
                        continue;
                    }
                    z[j] = x[j];
                    let next = model.predict(&z);
                    for o in 0..n_out {
                        c[o][j] += next[o] - prev[o];
                    }
                    prev = next;
                }
            }
            c.iter_mut().flatten().for_each(|v| *v /= m);
            c
        })
        .collect();

    let base = baseline(model, bg);
    let prediction = model.predict(x);
    let k = n_permutations as f64;
    Ok((0..n_out)
        .map(|o| {
            let mean: Vec<f64> = (0..n)
                .map(|j| contributions.iter().map(|c| c[o][j]).sum::<f64>() / k)
                .collect();
            let var: Vec<f64> = (0..n)
                .map(|j| {
                    if n_permutations < 2 {
                        return f64::NAN;
                    }
                    contributions.iter().map(|c| (c[o][j] - mean[j]).powi(2)).sum::<f64>() / (k - 1.0)
                })
                .collect();
            let std_errors: Vec<f64> = var.iter().map(|v| (v / k).sqrt()).collect();
            let mut phi = mean;
            let residual = prediction[o] - base[o] - phi.iter().sum::<f64>();
            let total_var: f64 = var.iter().filter(|v| v.is_finite()).sum();
            for (j, p) in phi.iter_mut().enumerate() {
                let share = if total_var > 0.0 && var[j].is_finite() {
                    var[j] / total_var
                } else {
                    1.0 / n as f64
                };
                *p += residual * share;
            }
            ShapExplanation {
                output: o,
                phi,
                baseline: base[o],
                prediction: prediction[o],
                std_errors: Some(std_errors),
                renormalized: true,
            }
        })
        .collect())
}

pub fn shap_sampled<M: Model + ?Sized>(
    model: &M,
    x: &[f64],
    bg: &BackgroundSet,
    output: usize,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapExplanation, ExplainError> {
    check_output(model, output)?;
    Ok(shap_sampled_all(model, x, bg, n_permutations, seed)?.swap_remove(output))
}
