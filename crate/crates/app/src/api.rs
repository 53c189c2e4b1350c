//! Request and response bodies of the `/v1` API and the transport-free
//! handlers behind them. The CLI calls the same handlers, so a prediction is
//! the same value whichever way it is asked for.

use democirc_core::data::{encode_record, BuildingRecord, FrameType, Output, UsageType, FEATURE_NAMES};
use democirc_core::explain::{shap_exact_all, BackgroundSet, FeatureGroups};
use democirc_core::learners::{TrainedModel, TrainingMetadata, FORMAT_VERSION};
use serde::{Deserialize, Serialize};

use crate::building::{ingest_building, BuildingModelFile, IngestError};

/// An error with an HTTP status, a stable machine-readable code and a message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(400, code, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Malformed(_) | IngestError::Io(_) => ApiError::bad_request("malformed_building", e.to_string()),
            IngestError::NoStoreys(_) | IngestError::NonPositiveDimension { .. } => {
                ApiError::new(422, "invalid_building", e.to_string())
            }
        }
    }
}

/// Geometry either inline (`gfa`, `volume`, `levels`) or from an embedded
/// building file, never both. Categories fall back to the building file's
/// defaults when omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gfa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub building: Option<BuildingModelFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_type: Option<String>,
}

impl PredictRequest {
    pub fn inline(gfa: f64, volume: f64, levels: u32, frame: FrameType, usage: UsageType) -> Self {
        PredictRequest {
            gfa: Some(gfa),
            volume: Some(volume),
            levels: Some(levels),
            building: None,
            frame_type: Some(frame.to_string()),
            usage_type: Some(usage.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    Inline,
    Building,
}

/// The predictors a response was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFeatures {
    pub gfa: f64,
    pub volume: f64,
    pub levels: u32,
    pub frame_type: FrameType,
    pub usage_type: UsageType,
    pub source: FeatureSource,
}

impl ResolvedFeatures {
    pub fn record(&self) -> BuildingRecord {
        BuildingRecord {
            gfa: self.gfa,
            volume: self.volume,
            levels: self.levels,
            frame_type: self.frame_type,
            usage_type: self.usage_type,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub recycle_m3: f64,
    pub reuse_m3: f64,
    pub landfill_m3: f64,
    pub model_fingerprint: String,
    pub features: ResolvedFeatures,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: String,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputExplanation {
    pub output: Output,
    pub prediction: f64,
    /// Mean prediction over the background set.
    pub baseline: f64,
    /// `prediction - baseline - Σ phi`.
    pub residual: f64,
    /// One entry per encoded feature, in layout order.
    pub attributions: Vec<Attribution>,
    /// gfa, volume, levels, frame, usage.
    pub grouped: Vec<Attribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub model_fingerprint: String,
    pub features: ResolvedFeatures,
    pub background_rows: usize,
    pub outputs: Vec<OutputExplanation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: String,
    pub display_name: String,
    pub fingerprint: String,
    pub schema: String,
    pub format_version: String,
    pub metadata: TrainingMetadata,
    pub feature_names: Vec<String>,
    pub outputs: Vec<Output>,
    pub background_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    pub name: String,
    pub gfa: f64,
    pub volume: f64,
    pub levels: u32,
    pub storeys: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_type: Option<FrameType>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage_type: Option<UsageType>,
}

fn parse_category<T: std::str::FromStr>(field: &str, raw: Option<&str>, allowed: &[&str]) -> Result<T, ApiError> {
    let raw = raw.ok_or_else(|| ApiError::bad_request("missing_field", format!("`{field}` is required")))?;
    raw.parse().map_err(|_| {
        ApiError::bad_request(
            "unknown_category",
            format!("`{field}` must be one of {}, got `{raw}`", allowed.join(", ")),
        )
    })
}

fn frame_names() -> Vec<&'static str> {
    FrameType::ALL.iter().map(|f| f.as_str()).collect()
}

fn usage_names() -> Vec<&'static str> {
    UsageType::ALL.iter().map(|u| u.as_str()).collect()
}

fn parse_optional<T: std::str::FromStr>(field: &str, raw: Option<&str>, allowed: &[&str]) -> Result<Option<T>, ApiError> {
    raw.map(|r| parse_category(field, Some(r), allowed)).transpose()
}

/// Validates a request and turns it into model inputs.
pub fn resolve_features(req: &PredictRequest) -> Result<ResolvedFeatures, ApiError> {
    let any_inline = req.gfa.is_some() || req.volume.is_some() || req.levels.is_some();
    let (gfa, volume, levels, source, defaults) = match (&req.building, any_inline) {
        (Some(_), true) => {
            return Err(ApiError::bad_request(
                "ambiguous_input",
                "give either gfa/volume/levels or a building file, not both",
            ))
        }
        (Some(file), false) => {
            let g = ingest_building(file)?;
            (g.gfa, g.volume, g.levels, FeatureSource::Building, Some(file))
        }
        (None, _) => {
            let missing: Vec<&str> = [("gfa", req.gfa.is_none()), ("volume", req.volume.is_none()), ("levels", req.levels.is_none())]
                .into_iter()
                .filter_map(|(n, m)| m.then_some(n))
                .collect();
            if !missing.is_empty() {
                return Err(ApiError::bad_request(
                    "missing_field",
                    format!("missing {} (or give a building file)", missing.join(", ")),
                ));
            }
            (req.gfa.unwrap(), req.volume.unwrap(), req.levels.unwrap(), FeatureSource::Inline, None)
        }
    };
    let frame_raw = req.frame_type.as_deref().or(defaults.and_then(|f| f.frame_type.as_deref()));
    let usage_raw = req.usage_type.as_deref().or(defaults.and_then(|f| f.usage_type.as_deref()));
    let frame_type: FrameType = parse_category("frame_type", frame_raw, &frame_names())?;
    let usage_type: UsageType = parse_category("usage_type", usage_raw, &usage_names())?;
    let record = BuildingRecord::new(gfa, volume, levels, frame_type, usage_type).map_err(|m| match source {
        FeatureSource::Inline => ApiError::bad_request("invalid_features", m),
        FeatureSource::Building => ApiError::new(422, "invalid_building", m),
    })?;
    Ok(ResolvedFeatures {
        gfa: record.gfa,
        volume: record.volume,
        levels: record.levels,
        frame_type,
        usage_type,
        source,
    })
}

pub fn handle_predict(req: &PredictRequest, model: &TrainedModel, fingerprint: &str) -> Result<PredictResponse, ApiError> {
    let features = resolve_features(req)?;
    let y = model.predict_record(&features.record());
    Ok(PredictResponse {
        recycle_m3: y.recycle,
        reuse_m3: y.reuse,
        landfill_m3: y.landfill,
        model_fingerprint: fingerprint.to_string(),
        features,
    })
}

pub fn handle_explain(
    req: &PredictRequest,
    model: &TrainedModel,
    fingerprint: &str,
    background: Option<&BackgroundSet>,
) -> Result<ExplainResponse, ApiError> {
    let features = resolve_features(req)?;
    let bg = background.ok_or_else(|| ApiError::new(503, "no_background", "the service was started without a background set"))?;
    let x = encode_record(&features.record());
    let explanations =
        shap_exact_all(model, &x.0, bg).map_err(|e| ApiError::new(500, "internal", e.to_string()))?;
    let groups = FeatureGroups::building();
    let named = |names: &[String], values: &[f64]| {
        names
            .iter()
            .zip(values)
            .map(|(n, &phi)| Attribution { feature: n.clone(), phi })
            .collect()
    };
    let outputs = explanations
        .iter()
        .map(|e| OutputExplanation {
            output: Output::ALL[e.output],
            prediction: e.prediction,
            baseline: e.baseline,
            residual: e.residual(),
            attributions: named(&groups.feature_names, &e.phi),
            grouped: named(&groups.group_names, &groups.apply(&e.phi)),
        })
        .collect();
    Ok(ExplainResponse {
        model_fingerprint: fingerprint.to_string(),
        features,
        background_rows: bg.len(),
        outputs,
    })
}

pub fn handle_ingest(file: &BuildingModelFile) -> Result<IngestResponse, ApiError> {
    let g = ingest_building(file)?;
    Ok(IngestResponse {
        name: file.name.clone(),
        gfa: g.gfa,
        volume: g.volume,
        levels: g.levels,
        storeys: file.storeys.len(),
        frame_type: parse_optional("frame_type", file.frame_type.as_deref(), &frame_names())?,
        usage_type: parse_optional("usage_type", file.usage_type.as_deref(), &usage_names())?,
    })
}

pub fn model_info(model: &TrainedModel, fingerprint: &str, background: Option<&BackgroundSet>) -> ModelInfo {
    ModelInfo {
        kind: model.kind().short_name().to_string(),
        display_name: model.kind().display_name().to_string(),
        fingerprint: fingerprint.to_string(),
        schema: model.schema.clone(),
        format_version: FORMAT_VERSION.to_string(),
        metadata: model.metadata.clone(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        outputs: Output::ALL.to_vec(),
        background_rows: background.map(BackgroundSet::len),
    }
}
