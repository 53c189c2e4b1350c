//! Simplified building files: a storey table from which the three geometric
//! predictors are derived.
//!
//! ```json
//! {
//!   "name": "Depot 4",
//!   "storeys": [
//!     { "label": "Ground", "floor_area": 100.0, "height": 3.0 },
//!     { "label": "First", "floor_area": 100.0, "height": 3.0 }
//!   ],
//!   "frame_type": "Steel",
//!   "usage_type": "Offices"
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("building `{0}` has no storeys")]
    NoStoreys(String),
    #[error("storey {index} (`{label}`): {field} must be positive, got {value}")]
    NonPositiveDimension {
        index: usize,
        label: String,
        field: &'static str,
        value: f64,
    },
    #[error("building file is not valid: {0}")]
    Malformed(String),
    #[error("cannot read building file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Storey {
    #[serde(default)]
    pub label: String,
    /// m².
    pub floor_area: f64,
    /// m.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingModelFile {
    #[serde(default)]
    pub name: String,
    pub storeys: Vec<Storey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_type: Option<String>,
}

/// Geometry derived from a building file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub gfa: f64,
    pub volume: f64,
    pub levels: u32,
}

impl BuildingModelFile {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        serde_json::from_str(text).map_err(|e| IngestError::Malformed(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// gfa = Σ floor_area, volume = Σ floor_area·height, levels = storey count.
pub fn ingest_building(file: &BuildingModelFile) -> Result<Geometry, IngestError> {
    if file.storeys.is_empty() {
        return Err(IngestError::NoStoreys(file.name.clone()));
    }
    let mut gfa = 0.0;
    let mut volume = 0.0;
    for (index, s) in file.storeys.iter().enumerate() {
        for (field, value) in [("floor_area", s.floor_area), ("height", s.height)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(IngestError::NonPositiveDimension {
                    index,
                    label: s.label.clone(),
                    field,
                    value,
                });
            }
        }
        gfa += s.floor_area;
        volume += s.floor_area * s.height;
    }
    let levels = u32::try_from(file.storeys.len()).map_err(|_| IngestError::Malformed("too many storeys".into()))?;
    Ok(Geometry { gfa, volume, levels })
}
