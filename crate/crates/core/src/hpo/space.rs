//! Search spaces and the mapping between concrete hyperparameters and the
//! unit cube the surrogate works in.
//!
//! Continuous and integer parameters take one coordinate each; a categorical
//! parameter with `m` values takes `m` coordinates and decodes to the value
//! with the largest coordinate (one-hot corner snapping).

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HpoError;
use crate::learners::{Growth, LearnerKind, LearnerParams, Weighting};

const SHIPPED_SPACES: &str = include_str!("../../spaces/search_spaces.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Continuous { low: f64, high: f64 },
    Integer { low: i64, high: i64 },
    Categorical { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamSpec {
    pub fn continuous(name: &str, low: f64, high: f64) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Continuous { low, high },
        }
    }

    pub fn integer(name: &str, low: i64, high: i64) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Integer { low, high },
        }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        ParamSpec {
            name: name.into(),
            kind: ParamKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    fn dims(&self) -> usize {
        match &self.kind {
            ParamKind::Categorical { values } => values.len(),
            _ => 1,
        }
    }

    fn validate(&self) -> Result<(), HpoError> {
        let bad = |why: &str| Err(HpoError::InvalidSpace(format!("{}: {why}", self.name)));
        match &self.kind {
            ParamKind::Continuous { low, high } if !(low.is_finite() && high.is_finite() && low < high) => {
                bad("needs finite low < high")
            }
            ParamKind::Integer { low, high } if low >= high => bad("needs low < high"),
            ParamKind::Categorical { values } if values.len() < 2 => bad("needs at least two values"),
            _ => Ok(()),
        }
    }

    fn contains(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (ParamKind::Continuous { low, high }, ParamValue::Real(v)) => low <= v && v <= high,
            (ParamKind::Integer { low, high }, ParamValue::Int(v)) => low <= v && v <= high,
            (ParamKind::Categorical { values }, ParamValue::Cat(v)) => values.contains(v),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            ParamValue::Cat(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Cat(v) => f.write_str(v),
        }
    }
}

/// Concrete hyperparameter values, in search-space order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<(String, ParamValue)>);

impl Assignment {
    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, value)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, HpoError> {
        if params.is_empty() {
            return Err(HpoError::InvalidSpace("search space has no parameters".into()));
        }
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(HpoError::InvalidSpace(format!("duplicate parameter `{}`", p.name)));
            }
        }
        Ok(SearchSpace { params })
    }

    /// The shipped space for a learner family.
    pub fn for_learner(kind: LearnerKind) -> SearchSpace {
        parse_search_spaces(SHIPPED_SPACES)
            .expect("shipped search spaces parse")
            .remove(&kind)
            .expect("every learner has a shipped space")
    }

    /// Width of the normalized cube.
    pub fn dims(&self) -> usize {
        self.params.iter().map(ParamSpec::dims).sum()
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Maps a point of the unit cube to concrete values. Coordinates are clamped
    /// to [0, 1]; integers round to the nearest value; categoricals take the
    /// largest coordinate of their block, the first on ties.
    pub fn decode(&self, u: &[f64]) -> Assignment {
        assert_eq!(u.len(), self.dims(), "point width");
        let mut at = 0;
        let values = self
            .params
            .iter()
            .map(|p| {
                let value = match &p.kind {
                    ParamKind::Continuous { low, high } => {
                        ParamValue::Real(low + u[at].clamp(0.0, 1.0) * (high - low))
                    }
                    ParamKind::Integer { low, high } => {
                        let span = (high - low) as f64;
                        let v = (*low as f64 + u[at].clamp(0.0, 1.0) * span).round() as i64;
                        ParamValue::Int(v.clamp(*low, *high))
                    }
                    ParamKind::Categorical { values } => {
                        let block = &u[at..at + values.len()];
                        let mut best = 0;
                        for (i, &c) in block.iter().enumerate() {
                            if c > block[best] {
                                best = i;
                            }
                        }
                        ParamValue::Cat(values[best].clone())
                    }
                };
                at += p.dims();
                (p.name.clone(), value)
            })
            .collect();
        Assignment(values)
    }

    /// Inverse of [`decode`](Self::decode) on feasible assignments.
    pub fn encode(&self, assignment: &Assignment) -> Result<Vec<f64>, HpoError> {
        let mut u = Vec::with_capacity(self.dims());
        for p in &self.params {
            let value = assignment
                .get(&p.name)
                .ok_or_else(|| HpoError::InvalidAssignment(format!("missing `{}`", p.name)))?;
            if !p.contains(value) {
                return Err(HpoError::InvalidAssignment(format!("`{}` = {value} is outside the space", p.name)));
            }
            match (&p.kind, value) {
                (ParamKind::Continuous { low, high }, ParamValue::Real(v)) => u.push((v - low) / (high - low)),
                (ParamKind::Integer { low, high }, ParamValue::Int(v)) => {
                    u.push((v - low) as f64 / (high - low) as f64)
                }
                (ParamKind::Categorical { values }, ParamValue::Cat(v)) => {
                    u.extend(values.iter().map(|c| if c == v { 1.0 } else { 0.0 }))
                }
                _ => unreachable!("checked by contains"),
            }
        }
        Ok(u)
    }

    /// Projects a cube point onto the feasible lattice: `encode(decode(u))`.
    pub fn snap(&self, u: &[f64]) -> Vec<f64> {
        self.encode(&self.decode(u)).expect("decoded points are feasible")
    }

    pub fn contains(&self, assignment: &Assignment) -> bool {
        assignment.0.len() == self.params.len()
            && self
                .params
                .iter()
                .all(|p| assignment.get(&p.name).is_some_and(|v| p.contains(v)))
    }
}

#[derive(Deserialize)]
struct SpacesFile {
    #[serde(flatten)]
    learners: HashMap<String, Vec<ParamSpec>>,
}

/// Parses a search-space file: one array of tables per learner short name.
pub fn parse_search_spaces(text: &str) -> Result<HashMap<LearnerKind, SearchSpace>, HpoError> {
    let file: SpacesFile = toml::from_str(text).map_err(|e| HpoError::InvalidSpace(e.to_string()))?;
    let mut spaces = HashMap::new();
    for (name, params) in file.learners {
        let kind: LearnerKind = name.parse().map_err(HpoError::InvalidSpace)?;
        let space = SearchSpace::new(params)?;
        params_from_assignment(kind, &space.decode(&vec![0.5; space.dims()]))?;
        spaces.insert(kind, space);
    }
    Ok(spaces)
}

pub fn load_search_spaces(path: impl AsRef<Path>) -> Result<HashMap<LearnerKind, SearchSpace>, HpoError> {
    let text = std::fs::read_to_string(path).map_err(|e| HpoError::InvalidSpace(e.to_string()))?;
    parse_search_spaces(&text)
}

fn int(name: &str, value: &ParamValue) -> Result<usize, HpoError> {
    match value {
        ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
        _ => Err(HpoError::InvalidAssignment(format!("`{name}` needs a non-negative integer"))),
    }
}

fn real(name: &str, value: &ParamValue) -> Result<f64, HpoError> {
    value
        .as_f64()
        .ok_or_else(|| HpoError::InvalidAssignment(format!("`{name}` needs a number")))
}

/// Starts from the family defaults and overrides every assigned field.
pub fn params_from_assignment(kind: LearnerKind, assignment: &Assignment) -> Result<LearnerParams, HpoError> {
    let mut params = LearnerParams::default_for(kind);
    for (name, value) in &assignment.0 {
        let n = name.as_str();
        let handled = match &mut params {
            LearnerParams::DecisionTree(p) => match n {
                "max_depth" => Some(p.max_depth = int(n, value)?),
                "min_samples_split" => Some(p.min_samples_split = int(n, value)?),
                "min_samples_leaf" => Some(p.min_samples_leaf = int(n, value)?),
                _ => None,
            },
            LearnerParams::RandomForest(p) => match n {
                "max_depth" => Some(p.tree.max_depth = int(n, value)?),
                "min_samples_split" => Some(p.tree.min_samples_split = int(n, value)?),
                "min_samples_leaf" => Some(p.tree.min_samples_leaf = int(n, value)?),
                "n_trees" => Some(p.n_trees = int(n, value)?),
                "features_per_split" => Some(p.features_per_split = int(n, value)?),
                _ => None,
            },
            LearnerParams::Knn(p) => match n {
                "n_neighbors" => Some(p.k = int(n, value)?),
                "p" => Some(p.p = real(n, value)?),
                "weights" => Some(
                    p.weighting = match value {
                        ParamValue::Cat(v) if v.eq_ignore_ascii_case("uniform") => Weighting::Uniform,
                        ParamValue::Cat(v) if v.eq_ignore_ascii_case("distance") => Weighting::Distance,
                        _ => {
                            return Err(HpoError::InvalidAssignment(format!(
                                "`weights` must be uniform or distance, got {value}"
                            )))
                        }
                    },
                ),
                _ => None,
            },
            LearnerParams::GbtLevelWise(p) | LearnerParams::GbtLeafWise(p) => match n {
                "max_depth" => Some(p.max_depth = int(n, value)?),
                "reg_alpha" => Some(p.alpha = real(n, value)?),
                "reg_lambda" => Some(p.lambda = real(n, value)?),
                "subsample" => Some(p.subsample = real(n, value)?),
                "n_estimators" => Some(p.n_estimators = int(n, value)?),
                "learning_rate" => Some(p.learning_rate = real(n, value)?),
                "max_leaves" => match &mut p.growth {
                    Growth::LeafWise { max_leaves, .. } => Some(*max_leaves = int(n, value)?),
                    Growth::LevelWise => None,
                },
                _ => None,
            },
        };
        if handled.is_none() {
            return Err(HpoError::InvalidAssignment(format!("`{name}` is not a {kind} hyperparameter")));
        }
    }
    Ok(params)
}
