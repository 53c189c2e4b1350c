//! The five multi-output learners behind one prediction contract.
//!
//! Decision trees and random forests use vector-valued leaves; KNN averages
//! neighbour target triples; the boosted ensembles run three scalar
//! ensembles in lock-step. All training is a pure function of
//! (dataset, params, seed).

mod boost;
mod cart;
mod forest;
mod knn;
mod persist;
mod split;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use self::boost::{BoostParams, BoostTree, BoostedEnsemble, Goss, Growth, LossCurve};
pub use self::cart::{DecisionTreeModel, RegressionTree, TreeParams};
pub use self::forest::{ForestModel, ForestParams};
pub use self::knn::{KnnModel, KnnParams, Weighting};
pub use self::persist::{load_model, load_model_path, model_fingerprint, save_model, save_model_path, PersistError, FORMAT_NAME, FORMAT_VERSION};
pub use self::tree::{Node, Tree};

use crate::data::{
    encode_record, BuildingRecord, Dataset, FeatureVector, Provenance, TargetTriple, FEATURE_NAMES,
    NUM_FEATURES, NUM_OUTPUTS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid one-side sampling fractions a = {a}, b = {b}")]
    InvalidGossFractions { a: f64, b: f64 },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("input has {found} features, the model expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },
}

/// Learner family, with the CLI short names `dt`, `knn`, `rf`, `xgb`, `lgbm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    DecisionTree,
    Knn,
    RandomForest,
    GbtLevelWise,
    GbtLeafWise,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::DecisionTree,
        LearnerKind::Knn,
        LearnerKind::RandomForest,
        LearnerKind::GbtLevelWise,
        LearnerKind::GbtLeafWise,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            LearnerKind::DecisionTree => "dt",
            LearnerKind::Knn => "knn",
            LearnerKind::RandomForest => "rf",
            LearnerKind::GbtLevelWise => "xgb",
            LearnerKind::GbtLeafWise => "lgbm",
        }
    }

    /// Display name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            LearnerKind::DecisionTree => "DT",
            LearnerKind::Knn => "KNN",
            LearnerKind::RandomForest => "RF",
            LearnerKind::GbtLevelWise => "XGBoost",
            LearnerKind::GbtLeafWise => "LightGBM",
        }
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearnerKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or_else(|| format!("unknown learner `{s}` (expected dt, knn, rf, xgb or lgbm)"))
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Hyperparameters for one learner family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerParams {
    DecisionTree(TreeParams),
    Knn(KnnParams),
    RandomForest(ForestParams),
    GbtLevelWise(BoostParams),
    GbtLeafWise(BoostParams),
}

impl LearnerParams {
    pub fn default_for(kind: LearnerKind) -> Self {
        match kind {
            LearnerKind::DecisionTree => LearnerParams::DecisionTree(TreeParams::default()),
            LearnerKind::Knn => LearnerParams::Knn(KnnParams::default()),
            LearnerKind::RandomForest => LearnerParams::RandomForest(ForestParams::default()),
            LearnerKind::GbtLevelWise => LearnerParams::GbtLevelWise(BoostParams::level_wise()),
            LearnerKind::GbtLeafWise => LearnerParams::GbtLeafWise(BoostParams::leaf_wise()),
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerParams::DecisionTree(_) => LearnerKind::DecisionTree,
            LearnerParams::Knn(_) => LearnerKind::Knn,
            LearnerParams::RandomForest(_) => LearnerKind::RandomForest,
            LearnerParams::GbtLevelWise(_) => LearnerKind::GbtLevelWise,
            LearnerParams::GbtLeafWise(_) => LearnerKind::GbtLeafWise,
        }
    }
}

/// A fitted learner of one of the five families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Learner {
    DecisionTree(DecisionTreeModel),
    Knn(KnnModel),
    RandomForest(ForestModel),
    GbtLevelWise(BoostedEnsemble),
    GbtLeafWise(BoostedEnsemble),
}

impl Learner {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Learner::DecisionTree(_) => LearnerKind::DecisionTree,
            Learner::Knn(_) => LearnerKind::Knn,
            Learner::RandomForest(_) => LearnerKind::RandomForest,
            Learner::GbtLevelWise(_) => LearnerKind::GbtLevelWise,
            Learner::GbtLeafWise(_) => LearnerKind::GbtLeafWise,
        }
    }

    fn predict_row(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        match self {
            Learner::DecisionTree(m) => m.predict(x),
            Learner::Knn(m) => m.predict(x),
            Learner::RandomForest(m) => m.predict(x),
            Learner::GbtLevelWise(m) | Learner::GbtLeafWise(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub trained_at: u64,
    pub provenance: Provenance,
    pub dataset_seed: Option<u64>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub learner: Learner,
    /// Fingerprint of the feature layout the model was trained on.
    pub schema: String,
    pub metadata: TrainingMetadata,
}

/// Hash of the frozen feature layout; any change to names or order changes it.
pub fn schema_fingerprint() -> &'static str {
    static FINGERPRINT: OnceLock<String> = OnceLock::new();
    FINGERPRINT.get_or_init(|| {
        let digest = Sha256::digest(format!("democirc-features:{}", FEATURE_NAMES.join(",")).as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    })
}

impl TrainedModel {
    pub fn kind(&self) -> LearnerKind {
        self.learner.kind()
    }

    pub fn predict(&self, x: &FeatureVector) -> TargetTriple {
        TargetTriple::from_array(self.learner.predict_row(&x.0))
    }

    pub fn predict_record(&self, record: &BuildingRecord) -> TargetTriple {
        self.predict(&encode_record(record))
    }

    /// Prediction on a raw row; fails unless it has exactly the model's width.
    pub fn predict_slice(&self, x: &[f64]) -> Result<TargetTriple, LearnError> {
        if x.len() != NUM_FEATURES {
            return Err(LearnError::SchemaMismatch {
                expected: NUM_FEATURES,
                found: x.len(),
            });
        }
        Ok(TargetTriple::from_array(self.learner.predict_row(x)))
    }

    pub(crate) fn predict_array(&self, x: &[f64]) -> [f64; NUM_OUTPUTS] {
        self.learner.predict_row(x)
    }
}

/// Trains any learner family on `train`.
pub fn train(train: &Dataset, params: &LearnerParams, seed: u64) -> Result<TrainedModel, LearnError> {
    Ok(train_with_curve(train, params, seed)?.0)
}

/// Like [`train`], also returning the per-stage training loss for boosted models
/// (empty for the other families).
pub fn train_with_curve(
    train: &Dataset,
    params: &LearnerParams,
    seed: u64,
) -> Result<(TrainedModel, LossCurve), LearnError> {
    if train.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let (x, y) = train.matrices();
    let (learner, curve) = match params {
        LearnerParams::DecisionTree(p) => (Learner::DecisionTree(DecisionTreeModel::fit(&x, &y, p)?), vec![]),
        LearnerParams::Knn(p) => (Learner::Knn(KnnModel::fit(&x, &y, p)?), vec![]),
        LearnerParams::RandomForest(p) => (Learner::RandomForest(ForestModel::fit(&x, &y, p, seed)?), vec![]),
        LearnerParams::GbtLevelWise(p) => {
            if p.growth != Growth::LevelWise {
                return Err(LearnError::InvalidParams("level-wise model needs level-wise growth".into()));
            }
            let (m, c) = BoostedEnsemble::fit(&x, &y, p, seed)?;
            (Learner::GbtLevelWise(m), c)
        }
        LearnerParams::GbtLeafWise(p) => {
            if p.growth == Growth::LevelWise {
                return Err(LearnError::InvalidParams("leaf-wise model needs leaf-wise growth".into()));
            }
            let (m, c) = BoostedEnsemble::fit(&x, &y, p, seed)?;
            (Learner::GbtLeafWise(m), c)
        }
    };
    let trained_at = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok((
        TrainedModel {
            learner,
            schema: schema_fingerprint().to_string(),
            metadata: TrainingMetadata {
                seed,
                trained_at,
                provenance: train.provenance,
                dataset_seed: train.seed,
                n_rows: train.len(),
            },
        },
        curve,
    ))
}

pub fn train_decision_tree(train: &Dataset, params: &TreeParams, seed: u64) -> Result<TrainedModel, LearnError> {
    self::train(train, &LearnerParams::DecisionTree(*params), seed)
}

pub fn train_knn(train: &Dataset, params: &KnnParams) -> Result<TrainedModel, LearnError> {
    self::train(train, &LearnerParams::Knn(*params), 0)
}

pub fn train_random_forest(train: &Dataset, params: &ForestParams, seed: u64) -> Result<TrainedModel, LearnError> {
    self::train(train, &LearnerParams::RandomForest(*params), seed)
}

pub fn train_gbt_levelwise(train: &Dataset, params: &BoostParams, seed: u64) -> Result<TrainedModel, LearnError> {
    let params = BoostParams {
        growth: Growth::LevelWise,
        ..*params
    };
    self::train(train, &LearnerParams::GbtLevelWise(params), seed)
}

/// Leaf-wise boosting with one-side sampling fractions `a` (top) and `b` (rest).
pub fn train_gbt_leafwise_goss(
    train: &Dataset,
    params: &BoostParams,
    max_leaves: usize,
    a: f64,
    b: f64,
    seed: u64,
) -> Result<TrainedModel, LearnError> {
    let goss = Goss {
        top_rate: a,
        other_rate: b,
    };
    goss.validate()?;
    let params = BoostParams {
        growth: Growth::LeafWise {
            max_leaves,
            goss: Some(goss),
        },
        ..*params
    };
    self::train(train, &LearnerParams::GbtLeafWise(params), seed)
}
