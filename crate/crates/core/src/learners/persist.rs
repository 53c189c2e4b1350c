//! Versioned JSON model files. The grammar is documented in `docs/model-format.md`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{schema_fingerprint, Learner, LearnerKind, Node, TrainedModel, TrainingMetadata, Tree};
use crate::data::{NUM_FEATURES, NUM_OUTPUTS};

pub const FORMAT_NAME: &str = "democirc-model";
/// `major.minor`; readers accept any minor of their major.
pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("model file version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("model was trained on feature layout {found}, this build uses {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'static str,
    version: &'static str,
    schema: &'a str,
    kind: LearnerKind,
    metadata: &'a TrainingMetadata,
    learner: &'a Learner,
}

#[derive(Deserialize)]
struct ModelFile {
    kind: LearnerKind,
    schema: String,
    metadata: TrainingMetadata,
    learner: Learner,
}

pub fn save_model<W: Write>(model: &TrainedModel, sink: W) -> Result<(), PersistError> {
    let file = ModelFileRef {
        format: FORMAT_NAME,
        version: FORMAT_VERSION,
        schema: &model.schema,
        kind: model.kind(),
        metadata: &model.metadata,
        learner: &model.learner,
    };
    let mut sink = BufWriter::new(sink);
    serde_json::to_writer_pretty(&mut sink, &file).map_err(|e| PersistError::CorruptFile(e.to_string()))?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn save_model_path(model: &TrainedModel, path: impl AsRef<Path>) -> Result<(), PersistError> {
    save_model(model, File::create(path)?)
}

/// Short content hash of a model's serialized form; identifies the exact
/// model behind a prediction.
pub fn model_fingerprint(model: &TrainedModel) -> String {
    let mut bytes = Vec::new();
    save_model(model, &mut bytes).expect("serializing to memory");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_model<R: Read>(source: R) -> Result<TrainedModel, PersistError> {
    let corrupt = |m: String| PersistError::CorruptFile(m);
    let value: serde_json::Value =
        serde_json::from_reader(BufReader::new(source)).map_err(|e| corrupt(e.to_string()))?;
    let header = |key: &str| value.get(key).and_then(|v| v.as_str());
    if header("format") != Some(FORMAT_NAME) {
        return Err(corrupt(format!("missing `format: \"{FORMAT_NAME}\"` header")));
    }
    let version = header("version").ok_or_else(|| corrupt("missing version".into()))?;
    let major = |v: &str| v.split('.').next().map(str::to_string);
    if major(version) != major(FORMAT_VERSION) {
        return Err(PersistError::VersionMismatch {
            found: version.to_string(),
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
    if file.schema != schema_fingerprint() {
        return Err(PersistError::SchemaMismatch {
            expected: schema_fingerprint().to_string(),
            found: file.schema,
        });
    }
    if file.kind != file.learner.kind() {
        return Err(corrupt("header kind disagrees with the stored learner".into()));
    }
    check_learner(&file.learner).map_err(corrupt)?;
    Ok(TrainedModel {
        learner: file.learner,
        schema: file.schema,
        metadata: file.metadata,
    })
}

pub fn load_model_path(path: impl AsRef<Path>) -> Result<TrainedModel, PersistError> {
    load_model(File::open(path)?)
}

fn check_tree<L: Clone>(tree: &Tree<L>) -> Result<(), String> {
    tree.check_structure()?;
    for node in &tree.nodes {
        if let Node::Internal { feature, threshold, .. } = node {
            if *feature >= NUM_FEATURES || threshold.is_nan() {
                return Err(format!("invalid split on feature {feature}"));
            }
        }
    }
    Ok(())
}

/// Structural checks so a well-formed but inconsistent file cannot panic at predict time.
fn check_learner(learner: &Learner) -> Result<(), String> {
    match learner {
        Learner::DecisionTree(m) => check_tree(&m.tree),
        Learner::RandomForest(m) => {
            if m.trees.is_empty() {
                return Err("forest has no trees".into());
            }
            m.trees.iter().try_for_each(check_tree)
        }
        Learner::Knn(m) => {
            if m.train_x.is_empty() || m.train_x.len() != m.train_y.len() {
                return Err("knn training set is empty or ragged".into());
            }
            if m.params.k == 0 || m.params.k > m.train_x.len() {
                return Err("knn k out of range".into());
            }
            Ok(())
        }
        Learner::GbtLevelWise(m) | Learner::GbtLeafWise(m) => {
            if m.trees.len() != NUM_OUTPUTS {
                return Err(format!("boosted model must hold {NUM_OUTPUTS} ensembles"));
            }
            m.trees.iter().flatten().try_for_each(check_tree)
        }
    }
}
