//! Dataset schema and feature encoding.
//!
//! A [`BuildingRecord`] holds the five predictors of one demolition project;
//! [`encode_record`] turns it into the fixed 14-wide [`FeatureVector`]:
//!
//! | index | feature |
//! |-------|---------|
//! | 0     | gfa (m²) |
//! | 1     | volume (m³) |
//! | 2     | levels |
//! | 3..=6 | frame one-hot: Concrete, Masonry, Steel, Timber |
//! | 7..=13| usage one-hot: Agricultural, Education, Factory, Hospital, Offices, Residential, Retail |
//!
//! The layout is frozen: persisted models carry a fingerprint of it.

mod csv;
mod split;
mod stats;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::csv::{load_csv, load_csv_path, write_csv, write_csv_path, CSV_HEADER};
pub use self::split::split_dataset;
pub use self::stats::{summarize, ColumnStats, DescriptiveStats};
pub use self::synth::{generate_synthetic, GeneratorConfig};

/// Width of the encoded feature vector.
pub const NUM_FEATURES: usize = 14;

/// Number of predicted quantities.
pub const NUM_OUTPUTS: usize = 3;

/// Feature names in encoding order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "gfa",
    "volume",
    "levels",
    "frame_concrete",
    "frame_masonry",
    "frame_steel",
    "frame_timber",
    "usage_agricultural",
    "usage_education",
    "usage_factory",
    "usage_hospital",
    "usage_offices",
    "usage_residential",
    "usage_retail",
];

pub(crate) const FRAME_OFFSET: usize = 3;
pub(crate) const USAGE_OFFSET: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("row {row}: missing column `{column}`")]
    MissingColumn { row: usize, column: String },
    #[error("row {row}: unknown {column} `{value}`")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: column `{column}` is not numeric: `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {message}")]
    ViolatedBound { row: usize, message: String },
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Building frame (structural system).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameType {
    Concrete,
    Masonry,
    Steel,
    Timber,
}

impl FrameType {
    pub const ALL: [FrameType; 4] = [
        FrameType::Concrete,
        FrameType::Masonry,
        FrameType::Steel,
        FrameType::Timber,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::Concrete => "Concrete",
            FrameType::Masonry => "Masonry",
            FrameType::Steel => "Steel",
            FrameType::Timber => "Timber",
        }
    }
}

/// Building usage category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UsageType {
    Agricultural,
    Education,
    Factory,
    Hospital,
    Offices,
    Residential,
    Retail,
}

impl UsageType {
    pub const ALL: [UsageType; 7] = [
        UsageType::Agricultural,
        UsageType::Education,
        UsageType::Factory,
        UsageType::Hospital,
        UsageType::Offices,
        UsageType::Residential,
        UsageType::Retail,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UsageType::Agricultural => "Agricultural",
            UsageType::Education => "Education",
            UsageType::Factory => "Factory",
            UsageType::Hospital => "Hospital",
            UsageType::Offices => "Offices",
            UsageType::Residential => "Residential",
            UsageType::Retail => "Retail",
        }
    }
}

/// Returned when a category string is not one of the enum names.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for FrameType {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FrameType::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl FromStr for UsageType {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UsageType::ALL
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for UsageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Predictors of one demolition project.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    /// Gross floor area, m².
    pub gfa: f64,
    /// Building volume, m³.
    pub volume: f64,
    /// Storey count.
    pub levels: u32,
    pub frame_type: FrameType,
    pub usage_type: UsageType,
}

impl BuildingRecord {
    /// Builds a record, checking `gfa > 0`, `volume > 0` and `levels >= 1`.
    pub fn new(
        gfa: f64,
        volume: f64,
        levels: u32,
        frame_type: FrameType,
        usage_type: UsageType,
    ) -> Result<Self, String> {
        let record = BuildingRecord {
            gfa,
            volume,
            levels,
            frame_type,
            usage_type,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gfa.is_finite() && self.gfa > 0.0) {
            return Err(format!("gfa must be positive, got {}", self.gfa));
        }
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(format!("volume must be positive, got {}", self.volume));
        }
        if self.levels < 1 {
            return Err("levels must be at least 1".to_string());
        }
        Ok(())
    }
}

/// Which of the three predicted quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Recycle,
    Reuse,
    Landfill,
}

impl Output {
    pub const ALL: [Output; NUM_OUTPUTS] = [Output::Recycle, Output::Reuse, Output::Landfill];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Output::Recycle => "recycle",
            Output::Reuse => "reuse",
            Output::Landfill => "landfill",
        }
    }
}

/// Recyclable, reusable and landfill quantities in m³.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetTriple {
    pub recycle: f64,
    pub reuse: f64,
    pub landfill: f64,
}

impl TargetTriple {
    pub fn new(recycle: f64, reuse: f64, landfill: f64) -> Self {
        TargetTriple {
            recycle,
            reuse,
            landfill,
        }
    }

    pub fn from_array(values: [f64; NUM_OUTPUTS]) -> Self {
        TargetTriple::new(values[0], values[1], values[2])
    }

    pub fn to_array(self) -> [f64; NUM_OUTPUTS] {
        [self.recycle, self.reuse, self.landfill]
    }

    pub fn get(&self, output: Output) -> f64 {
        match output {
            Output::Recycle => self.recycle,
            Output::Reuse => self.reuse,
            Output::Landfill => self.landfill,
        }
    }

    /// Mean across the three materials.
    pub fn mean(&self) -> f64 {
        (self.recycle + self.reuse + self.landfill) / 3.0
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        for output in Output::ALL {
            let v = self.get(output);
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{} must be non-negative, got {v}", output.name()));
            }
        }
        Ok(())
    }
}

/// The 14-wide encoded predictor vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Recovers the frame and usage categories from the one-hot blocks.
    /// Returns `None` unless each block holds exactly one 1 and zeros elsewhere.
    pub fn decode_categories(&self) -> Option<(FrameType, UsageType)> {
        let frame = one_hot_position(&self.0[FRAME_OFFSET..USAGE_OFFSET])?;
        let usage = one_hot_position(&self.0[USAGE_OFFSET..NUM_FEATURES])?;
        Some((FrameType::ALL[frame], UsageType::ALL[usage]))
    }
}

fn one_hot_position(block: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &v) in block.iter().enumerate() {
        if v == 1.0 {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hit
}

/// Encodes a record into the frozen feature layout.
pub fn encode_record(record: &BuildingRecord) -> FeatureVector {
    let mut v = [0.0; NUM_FEATURES];
    v[0] = record.gfa;
    v[1] = record.volume;
    v[2] = f64::from(record.levels);
    v[FRAME_OFFSET + record.frame_type.index()] = 1.0;
    v[USAGE_OFFSET + record.usage_type.index()] = 1.0;
    FeatureVector(v)
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Csv,
    Synthetic,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Csv => "csv",
            Provenance::Synthetic => "synthetic",
        })
    }
}

/// Labelled demolition records. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<(BuildingRecord, TargetTriple)>,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(records: Vec<(BuildingRecord, TargetTriple)>, provenance: Provenance) -> Self {
        Dataset {
            records,
            provenance,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.records.iter().map(|(r, _)| encode_record(r)).collect()
    }

    pub fn targets(&self) -> Vec<TargetTriple> {
        self.records.iter().map(|(_, t)| *t).collect()
    }

    /// Row-major feature matrix and target matrix, the form the learners train on.
    pub(crate) fn matrices(&self) -> (Vec<[f64; NUM_FEATURES]>, Vec<[f64; NUM_OUTPUTS]>) {
        self.records
            .iter()
            .map(|(r, t)| (encode_record(r).0, t.to_array()))
            .unzip()
    }

    /// Sub-dataset made of the given row indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            provenance: self.provenance,
            seed: self.seed,
        }
    }

    pub(crate) fn require_non_empty(&self) -> Result<(), DataError> {
        if self.is_empty() {
            Err(DataError::EmptyDataset)
        } else {
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_concrete_residential() {
        let r = BuildingRecord::new(100.0, 300.0, 1, FrameType::Concrete, UsageType::Residential)
            .unwrap();
        assert_eq!(
            encode_record(&r).0,
            [100., 300., 1., 1., 0., 0., 0., 0., 0., 0., 0., 0., 1., 0.]
        );
    }

    #[test]
    fn encodes_smallest_building() {
        let r = BuildingRecord::new(4.8, 9.6, 1, FrameType::Timber, UsageType::Agricultural)
            .unwrap();
        assert_eq!(
            encode_record(&r).0,
            [4.8, 9.6, 1., 0., 0., 0., 1., 1., 0., 0., 0., 0., 0., 0.]
        );
    }

    #[test]
    fn usage_only_touches_usage_block() {
        let a = BuildingRecord::new(10.0, 30.0, 2, FrameType::Steel, UsageType::Offices).unwrap();
        let b = BuildingRecord {
            usage_type: UsageType::Hospital,
            ..a
        };
        assert_eq!(encode_record(&a).0[..7], encode_record(&b).0[..7]);
        assert_ne!(encode_record(&a), encode_record(&b));
    }

    #[test]
    fn one_hot_round_trip_all_categories() {
        for frame in FrameType::ALL {
            for usage in UsageType::ALL {
                let r = BuildingRecord::new(1.0, 2.0, 1, frame, usage).unwrap();
                let v = encode_record(&r);
                assert_eq!(v.0[3..7].iter().sum::<f64>(), 1.0);
                assert_eq!(v.0[7..14].iter().sum::<f64>(), 1.0);
                assert_eq!(v.decode_categories(), Some((frame, usage)));
            }
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(BuildingRecord::new(0.0, 1.0, 1, FrameType::Steel, UsageType::Retail).is_err());
        assert!(BuildingRecord::new(1.0, -1.0, 1, FrameType::Steel, UsageType::Retail).is_err());
        assert!(BuildingRecord::new(1.0, 1.0, 0, FrameType::Steel, UsageType::Retail).is_err());
        assert!(BuildingRecord::new(f64::NAN, 1.0, 1, FrameType::Steel, UsageType::Retail).is_err());
    }

    #[test]
    fn category_parsing_is_closed() {
        assert_eq!("Steel".parse::<FrameType>(), Ok(FrameType::Steel));
        assert!("Brick".parse::<FrameType>().is_err());
        assert!("steel".parse::<FrameType>().is_err());
        assert_eq!("Retail".parse::<UsageType>(), Ok(UsageType::Retail));
    }
}
