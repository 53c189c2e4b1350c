//! Demolition-waste circularity modelling.
//!
//! Predicts the recyclable, reusable and landfill quantities (m³) of a
//! building's demolition output from five building parameters. The crate
//! covers the whole modelling path:
//!
//! * [`data`]: record schema, one-hot encoding, CSV loading, splitting and a
//!   seeded synthetic dataset generator.
//! * [`learners`]: decision tree, KNN, random forest and two gradient-boosted
//!   tree ensembles (level-wise and leaf-wise with gradient-based one-side
//!   sampling), all multi-output, plus model persistence.
//! * [`hpo`]: Gaussian-process Bayesian optimization with Expected Improvement.
//! * [`evaluate`]: the seven-metric suite and Copeland pairwise ranking.
//! * [`explain`]: interventional Shapley attributions (exact and sampled) and
//!   global importance summaries.

pub mod data;
pub mod evaluate;
pub mod explain;
pub mod hpo;
pub mod learners;
mod rng;

pub use data::{
    BuildingRecord, Dataset, FeatureVector, FrameType, Output, TargetTriple, UsageType,
    NUM_FEATURES,
};
pub use learners::{LearnerKind, LearnerParams, TrainedModel};
