//! Small CSV tables: aligned pair maps and variant-record exports.

use std::path::Path;

use crate::datamodel::manifest::csv_error;
use crate::datamodel::types::VariantRecord;
use crate::error::{Error, Result};

/// Reads a `real_id,synth_id` table (header required).
pub fn read_pair_map(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() != 2 || &headers[0] != "real_id" || &headers[1] != "synth_id" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "line 1".into(),
            message: "expected header real_id,synth_id".into(),
        });
    }
    let mut pairs = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        pairs.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(pairs)
}

pub fn write_pair_map(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["real_id", "synth_id"]).map_err(|e| csv_error(path, e))?;
    for (r, s) in pairs {
        w.write_record([r, s]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const VARIANT_HEADER: [&str; 6] = [
    "variant_id",
    "mean_appearance",
    "mean_geometry_log",
    "downstream_score",
    "n_pairs",
    "collection",
];

/// Writes `variant_id,mean_appearance,mean_geometry_log,downstream_score,n_pairs,collection`.
/// An absent downstream score is written as an empty field.
pub fn write_variant_table(path: &Path, records: &[VariantRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(VARIANT_HEADER).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([
            r.variant_id.clone(),
            r.mean_appearance.to_string(),
            r.mean_geometry_log.to_string(),
            r.downstream_score.map(|y| y.to_string()).unwrap_or_default(),
            r.n_pairs.to_string(),
            r.collection.clone(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a variant table. The trailing `collection` column is optional.
pub fn read_variant_table(path: &Path) -> Result<Vec<VariantRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let ncols = headers.len();
    if !(ncols == 5 || ncols == 6) || headers.iter().zip(VARIANT_HEADER).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            location: "line 1".into(),
            message: format!("expected header {}", VARIANT_HEADER[..5].join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    location: format!("line {line}, field {}", VARIANT_HEADER[k]),
                    message: "not a number".into(),
                })
        };
        let y = match rec.get(3).unwrap_or("") {
            "" => None,
            _ => Some(num(3)?),
        };
        let n_pairs = rec.get(4).unwrap_or("").parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            location: format!("line {line}, field n_pairs"),
            message: "not a non-negative integer".into(),
        })?;
        let record = VariantRecord {
            variant_id: rec.get(0).unwrap_or("").to_string(),
            collection: rec.get(5).unwrap_or("").to_string(),
            mean_appearance: num(1)?,
            mean_geometry_log: num(2)?,
            downstream_score: y,
            n_pairs,
        };
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}
