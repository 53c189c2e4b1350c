use std::fmt::Write as _;

use serde::Serialize;

use super::shapley::{shap_exact_all, shap_sampled_all, ShapExplanation};
use super::{BackgroundSet, ExplainError, Model};
use crate::data::{FEATURE_NAMES, NUM_FEATURES};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Exact,
    Sampled { n_permutations: usize, seed: u64 },
}

/// Named blocks of features whose attributions are summed in the grouped view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureGroups {
    pub feature_names: Vec<String>,
    pub group_names: Vec<String>,
    pub members: Vec<Vec<usize>>,
}

impl FeatureGroups {
    /// gfa, volume, levels, frame (4 indicators), usage (7 indicators).
    pub fn building() -> Self {
        FeatureGroups {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            group_names: ["gfa", "volume", "levels", "frame", "usage"].map(String::from).to_vec(),
            members: vec![vec![0], vec![1], vec![2], (3..7).collect(), (7..NUM_FEATURES).collect()],
        }
    }

    /// One group per feature, named `x0`, `x1`, ...
    pub fn singletons(n: usize) -> Self {
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        FeatureGroups {
            feature_names: names.clone(),
            group_names: names,
            members: (0..n).map(|i| vec![i]).collect(),
        }
    }

    fn for_width(n: usize) -> Self {
        if n == NUM_FEATURES {
            FeatureGroups::building()
        } else {
            FeatureGroups::singletons(n)
        }
    }

    /// Sums each group's attributions; preserves `Σ phi`.
    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        self.members.iter().map(|m| m.iter().map(|&j| phi[j]).sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalImportance {
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    /// Mean |phi| per output and feature: `[output][feature]`.
    pub per_output: Vec<Vec<f64>>,
    /// Mean of `per_output` across outputs.
    pub overall: Vec<f64>,
    /// Feature indices by descending `overall`, lower index first on ties.
    pub ranking: Vec<usize>,
    pub group_names: Vec<String>,
    /// Mean |Σ phi over the group| per output and group.
    pub grouped_per_output: Vec<Vec<f64>>,
    pub grouped_overall: Vec<f64>,
}

impl GlobalImportance {
    /// `(feature name, overall importance)` in ranking order.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        self.ranking
            .iter()
            .map(|&j| (self.feature_names[j].as_str(), self.overall[j]))
            .collect()
    }
}

fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Mean absolute attributions over `rows`, with the building grouping for
/// 14-wide models and one group per feature otherwise.
pub fn global_importance<M: Model + ?Sized, R: AsRef<[f64]>>(
    model: &M,
    rows: &[R],
    bg: &BackgroundSet,
    method: Method,
) -> Result<GlobalImportance, ExplainError> {
    global_importance_with_groups(model, rows, bg, method, &FeatureGroups::for_width(model.n_features()))
}

pub fn global_importance_with_groups<M: Model + ?Sized, R: AsRef<[f64]>>(
    model: &M,
    rows: &[R],
    bg: &BackgroundSet,
    method: Method,
    groups: &FeatureGroups,
) -> Result<GlobalImportance, ExplainError> {
    if rows.is_empty() {
        return Err(ExplainError::EmptyEvalSet);
    }
    let (n_f, n_o, n_g) = (model.n_features(), model.n_outputs(), groups.members.len());
    let mut per_output = vec![vec![0.0; n_f]; n_o];
    let mut grouped_per_output = vec![vec![0.0; n_g]; n_o];
    for (i, row) in rows.iter().enumerate() {
        let explanations = match method {
            Method::Exact => shap_exact_all(model, row.as_ref(), bg)?,
            Method::Sampled { n_permutations, seed } => {
                shap_sampled_all(model, row.as_ref(), bg, n_permutations, rng::child_seed(seed, i as u64))?
            }
        };
        for e in &explanations {
            for (acc, p) in per_output[e.output].iter_mut().zip(&e.phi) {
                *acc += p.abs();
            }
            for (acc, p) in grouped_per_output[e.output].iter_mut().zip(groups.apply(&e.phi)) {
                *acc += p.abs();
            }
        }
    }
    let n = rows.len() as f64;
    per_output.iter_mut().flatten().for_each(|v| *v /= n);
    grouped_per_output.iter_mut().flatten().for_each(|v| *v /= n);
    let across = |table: &[Vec<f64>], width: usize| -> Vec<f64> {
        (0..width)
            .map(|j| table.iter().map(|t| t[j]).sum::<f64>() / n_o as f64)
            .collect()
    };
    let overall = across(&per_output, n_f);
    let grouped_overall = across(&grouped_per_output, n_g);
    Ok(GlobalImportance {
        n_rows: rows.len(),
        feature_names: groups.feature_names.clone(),
        ranking: ranking(&overall),
        per_output,
        overall,
        group_names: groups.group_names.clone(),
        grouped_per_output,
        grouped_overall,
    })
}

/// `feature,output,phi`, one row per feature per explanation.
pub fn explanations_csv(feature_names: &[String], output_names: &[&str], explanations: &[ShapExplanation]) -> String {
    let mut out = String::from("feature,output,phi\n");
    for e in explanations {
        let output = output_names.get(e.output).copied().unwrap_or("?");
        for (name, phi) in feature_names.iter().zip(&e.phi) {
            let _ = writeln!(out, "{name},{output},{phi}");
        }
    }
    out
}

/// Horizontal bars, largest magnitude first; `+` bars raise the prediction,
/// `-` bars lower it.
pub fn bar_chart(names: &[String], values: &[f64], width: usize) -> String {
    let name_w = names.iter().map(String::len).max().unwrap_or(0);
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut out = String::new();
    for j in order {
        let v = values[j];
        let len = if max > 0.0 {
            (v.abs() / max * width as f64).round() as usize
        } else {
            0
        };
        let bar = if v < 0.0 { "-" } else { "+" }.repeat(len);
        let _ = writeln!(out, "{:<name_w$}  {:<width$}  {v:.4}", names[j], bar);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::FnModel;

    #[test]
    fn building_groups_partition_the_layout() {
        let g = FeatureGroups::building();
        let mut all: Vec<usize> = g.members.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..NUM_FEATURES).collect::<Vec<_>>());
        let phi: Vec<f64> = (0..NUM_FEATURES).map(|i| i as f64).collect();
        assert_eq!(g.apply(&phi), vec![0.0, 1.0, 2.0, 18.0, 70.0]);
    }

    #[test]
    fn ties_rank_by_index() {
        assert_eq!(ranking(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn single_row_importance_is_abs_phi() {
        let model = FnModel::new(3, 1, |x: &[f64]| vec![2.0 * x[0] - x[1]]);
        let bg = BackgroundSet::new(vec![vec![0.0; 3], vec![1.0; 3]]).unwrap();
        let row = [3.0, 4.0, 5.0];
        let gi = global_importance(&model, &[row], &bg, Method::Exact).unwrap();
        let e = shap_exact_all(&model, &row, &bg).unwrap();
        let abs: Vec<f64> = e[0].phi.iter().map(|p| p.abs()).collect();
        assert_eq!(gi.per_output[0], abs);
        assert_eq!(gi.ranking, vec![0, 1, 2]);
        assert!(global_importance(&model, &Vec::<Vec<f64>>::new(), &bg, Method::Exact).is_err());
    }

    #[test]
    fn chart_orders_by_magnitude() {
        let names = vec!["a".to_string(), "bb".to_string()];
        let chart = bar_chart(&names, &[1.0, -2.0], 4);
        let lines: Vec<&str> = chart.lines().collect();
        assert!(lines[0].starts_with("bb  ----"));
        assert!(lines[1].starts_with("a   ++  "));
    }
}
