use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{BuildingRecord, DataError, Dataset, FrameType, Provenance, TargetTriple, UsageType};

/// Exact header of the dataset CSV.
pub const CSV_HEADER: [&str; 8] = [
    "gfa",
    "volume",
    "levels",
    "frame_type",
    "usage_type",
    "recycle",
    "reuse",
    "landfill",
];

/// Loads a dataset. Rows are numbered from 1 (the first data row); header
/// problems are reported as row 0.
pub fn load_csv<R: Read>(source: R) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let mut columns = [0usize; 8];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                row: 0,
                column: name.to_string(),
            })?;
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| DataError::Csv(e.to_string()))?;
        let field = |k: usize| -> Result<&str, DataError> {
            row.get(columns[k])
                .filter(|s| !s.is_empty())
                .ok_or_else(|| DataError::MissingColumn {
                    row: row_no,
                    column: CSV_HEADER[k].to_string(),
                })
        };
        let number = |k: usize| -> Result<f64, DataError> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumeric {
                    row: row_no,
                    column: CSV_HEADER[k].to_string(),
                    value: raw.to_string(),
                })
        };

        let gfa = number(0)?;
        let volume = number(1)?;
        let levels_raw = number(2)?;
        if levels_raw.fract() != 0.0 || levels_raw < 1.0 || levels_raw > f64::from(u32::MAX) {
            return Err(DataError::ViolatedBound {
                row: row_no,
                message: format!("levels must be an integer >= 1, got {levels_raw}"),
            });
        }
        let frame_raw = field(3)?;
        let frame: FrameType = frame_raw.parse().map_err(|_| DataError::UnknownCategory {
            row: row_no,
            column: "frame_type".to_string(),
            value: frame_raw.to_string(),
        })?;
        let usage_raw = field(4)?;
        let usage: UsageType = usage_raw.parse().map_err(|_| DataError::UnknownCategory {
            row: row_no,
            column: "usage_type".to_string(),
            value: usage_raw.to_string(),
        })?;
        let record = BuildingRecord::new(gfa, volume, levels_raw as u32, frame, usage)
            .map_err(|message| DataError::ViolatedBound {
                row: row_no,
                message,
            })?;
        let target = TargetTriple::new(number(5)?, number(6)?, number(7)?);
        target.validate().map_err(|message| DataError::ViolatedBound {
            row: row_no,
            message,
        })?;
        records.push((record, target));
    }
    Ok(Dataset::new(records, Provenance::Csv))
}

pub fn load_csv_path(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let file = File::open(path.as_ref())
        .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    load_csv(file)
}

/// Writes a dataset with full-precision numbers, so that `load_csv` recovers it exactly.
pub fn write_csv<W: Write>(dataset: &Dataset, sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| DataError::Csv(e.to_string());
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for (r, t) in &dataset.records {
        writer
            .write_record([
                r.gfa.to_string(),
                r.volume.to_string(),
                r.levels.to_string(),
                r.frame_type.to_string(),
                r.usage_type.to_string(),
                t.recycle.to_string(),
                t.reuse.to_string(),
                t.landfill.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| DataError::Io(e.to_string()))
}

pub fn write_csv_path(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let file = File::create(path.as_ref())
        .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_csv(dataset, file)
}
