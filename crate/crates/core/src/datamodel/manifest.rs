//! Feature manifests produced outside the engine.
//!
//! An embedding manifest is a pair of files:
//!
//! * `<stem>.index`: newline-delimited JSON records
//!   `{"image_id": "...", "offset_bytes": N, "dim": D}`. An optional first
//!   record of the form `{"header": {...}}` carries free-form provenance.
//! * `<stem>.blob`: float32 little-endian vectors, contiguous, no padding.
//!
//! Keypoint manifests use the same layout with an extra `count` field per
//! record; the blob then holds `count` rows of `[x, y, descriptor[D]]`.
//!
//! Correspondence sets are CSV tables with the header `x1,y1,x2,y2`.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum IndexLine {
    Header {
        header: serde_json::Value,
    },
    Record {
        image_id: String,
        offset_bytes: u64,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
}

pub fn index_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "index")
}

pub fn blob_path(stem: &Path) -> PathBuf {
    with_suffix(stem, "blob")
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingManifest {
    pub dim: usize,
    pub header: Option<serde_json::Value>,
    ids: HashMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingManifest {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&[f32]> {
        self.ids
            .get(image_id)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Loads `<stem>.index` and `<stem>.blob`.
    pub fn load(stem: &Path) -> Result<Self> {
        let (header, records, blob) = read_manifest(stem)?;
        let blob_file = blob_path(stem);
        let dim = records.first().map(|r| r.dim).unwrap_or(0);
        let mut ids = HashMap::with_capacity(records.len());
        let mut data = Vec::with_capacity(records.len() * dim);
        for (row, rec) in records.iter().enumerate() {
            if rec.dim != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{}: image '{}' has dim {} but manifest dim is {}",
                    index_path(stem).display(),
                    rec.image_id,
                    rec.dim,
                    dim
                )));
            }
            let values = read_f32s(&blob, rec.offset_bytes, dim, &blob_file, &rec.image_id)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(
                    &blob_file,
                    format!("non-finite embedding component for image '{}'", rec.image_id),
                ));
            }
            data.extend_from_slice(&values);
            if ids.insert(rec.image_id.clone(), row).is_some() {
                return Err(Error::format(
                    index_path(stem),
                    format!("duplicate image id '{}'", rec.image_id),
                ));
            }
        }
        check_blob_length(&records, dim, 1, blob.len(), stem)?;
        Ok(EmbeddingManifest {
            dim,
            header,
            ids,
            data,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub descriptor: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointManifest {
    pub dim: usize,
    pub header: Option<serde_json::Value>,
    images: HashMap<String, Vec<Keypoint>>,
}

impl KeypointManifest {
    pub fn get(&self, image_id: &str) -> Option<&[Keypoint]> {
        self.images.get(image_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (header, records, blob) = read_manifest(stem)?;
        let blob_file = blob_path(stem);
        let dim = records.first().map(|r| r.dim).unwrap_or(0);
        let mut images = HashMap::with_capacity(records.len());
        for rec in &records {
            if rec.dim != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{}: image '{}' has dim {} but manifest dim is {}",
                    index_path(stem).display(),
                    rec.image_id,
                    rec.dim,
                    dim
                )));
            }
            let count = rec.count.ok_or_else(|| {
                Error::format(
                    index_path(stem),
                    format!("keypoint record '{}' lacks 'count'", rec.image_id),
                )
            })?;
            let row = dim + 2;
            let values = read_f32s(&blob, rec.offset_bytes, row * count, &blob_file, &rec.image_id)?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(
                    &blob_file,
                    format!("non-finite keypoint value for image '{}'", rec.image_id),
                ));
            }
            let kps = values
                .chunks_exact(row)
                .map(|r| Keypoint {
                    x: r[0] as f64,
                    y: r[1] as f64,
                    descriptor: r[2..].to_vec(),
                })
                .collect();
            if images.insert(rec.image_id.clone(), kps).is_some() {
                return Err(Error::format(
                    index_path(stem),
                    format!("duplicate image id '{}'", rec.image_id),
                ));
            }
        }
        let total: usize = records
            .iter()
            .map(|r| r.count.unwrap_or(0) * (dim + 2))
            .sum();
        if total * 4 != blob.len() {
            return Err(blob_size_error(stem, total * 4, blob.len()));
        }
        Ok(KeypointManifest {
            dim,
            header,
            images,
        })
    }
}

struct Rec {
    image_id: String,
    offset_bytes: u64,
    dim: usize,
    count: Option<usize>,
}

type ManifestParts = (Option<serde_json::Value>, Vec<Rec>, Vec<u8>);

fn read_manifest(stem: &Path) -> Result<ManifestParts> {
    let idx = index_path(stem);
    let text = std::fs::read_to_string(&idx).map_err(|e| Error::io(&idx, e))?;
    let blob_file = blob_path(stem);
    let blob = std::fs::read(&blob_file).map_err(|e| Error::io(&blob_file, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: IndexLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: idx.clone(),
            location: format!("line {}", lineno + 1),
            message: e.to_string(),
        })?;
        match parsed {
            IndexLine::Header { header: h } => {
                if !records.is_empty() || header.is_some() {
                    return Err(Error::Parse {
                        path: idx.clone(),
                        location: format!("line {}", lineno + 1),
                        message: "header record must come first".into(),
                    });
                }
                header = Some(h);
            }
            IndexLine::Record {
                image_id,
                offset_bytes,
                dim,
                count,
            } => records.push(Rec {
                image_id,
                offset_bytes,
                dim,
                count,
            }),
        }
    }
    Ok((header, records, blob))
}

fn read_f32s(blob: &[u8], offset: u64, n: usize, path: &Path, image_id: &str) -> Result<Vec<f32>> {
    let start = offset as usize;
    let end = start + n * 4;
    if end > blob.len() {
        return Err(Error::format(
            path,
            format!(
                "blob truncated: image '{image_id}' needs bytes {start}..{end} but blob has {}",
                blob.len()
            ),
        ));
    }
    Ok(blob[start..end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn check_blob_length(records: &[Rec], dim: usize, rows: usize, len: usize, stem: &Path) -> Result<()> {
    let expected = records.len() * dim * rows * 4;
    if expected != len {
        return Err(blob_size_error(stem, expected, len));
    }
    Ok(())
}

fn blob_size_error(stem: &Path, expected: usize, got: usize) -> Error {
    Error::DimensionMismatch(format!(
        "{}: index describes {expected} bytes but blob holds {got}",
        blob_path(stem).display()
    ))
}

/// Writes an embedding manifest. All vectors must share one dimension.
pub fn write_embedding_manifest(
    stem: &Path,
    header: Option<&serde_json::Value>,
    entries: &[(String, Vec<f32>)],
) -> Result<()> {
    let dim = entries.first().map(|e| e.1.len()).unwrap_or(0);
    let mut index = Vec::new();
    let mut blob = Vec::with_capacity(entries.len() * dim * 4);
    if let Some(h) = header {
        push_line(&mut index, &IndexLine::Header { header: h.clone() });
    }
    for (id, v) in entries {
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding for '{id}' has dim {} (expected {dim})",
                v.len()
            )));
        }
        push_line(
            &mut index,
            &IndexLine::Record {
                image_id: id.clone(),
                offset_bytes: blob.len() as u64,
                dim,
                count: None,
            },
        );
        for x in v {
            blob.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_file(&index_path(stem), &index)?;
    write_file(&blob_path(stem), &blob)
}

pub fn write_keypoint_manifest(
    stem: &Path,
    header: Option<&serde_json::Value>,
    dim: usize,
    entries: &[(String, Vec<Keypoint>)],
) -> Result<()> {
    let mut index = Vec::new();
    let mut blob = Vec::new();
    if let Some(h) = header {
        push_line(&mut index, &IndexLine::Header { header: h.clone() });
    }
    for (id, kps) in entries {
        push_line(
            &mut index,
            &IndexLine::Record {
                image_id: id.clone(),
                offset_bytes: blob.len() as u64,
                dim,
                count: Some(kps.len()),
            },
        );
        for kp in kps {
            if kp.descriptor.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "keypoint descriptor for '{id}' has dim {} (expected {dim})",
                    kp.descriptor.len()
                )));
            }
            blob.extend_from_slice(&(kp.x as f32).to_le_bytes());
            blob.extend_from_slice(&(kp.y as f32).to_le_bytes());
            for x in &kp.descriptor {
                blob.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    write_file(&index_path(stem), &index)?;
    write_file(&blob_path(stem), &blob)
}

fn push_line(buf: &mut Vec<u8>, line: &IndexLine) {
    serde_json::to_writer(&mut *buf, line).expect("index record serializes");
    buf.push(b'\n');
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrespondenceSource {
    ExternalManifest,
    MutualNn,
}

/// Tentative point matches between a real image (`x1,y1`) and a synthetic image (`x2,y2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub matches: Vec<[f64; 4]>,
    pub source: CorrespondenceSource,
}

impl CorrespondenceSet {
    pub fn new(matches: Vec<[f64; 4]>, source: CorrespondenceSource) -> Self {
        CorrespondenceSet { matches, source }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let expected = ["x1", "y1", "x2", "y2"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                location: "line 1".into(),
                message: format!("expected header x1,y1,x2,y2, found {:?}", headers),
            });
        }
        let mut matches = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let mut row = [0.0; 4];
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    location: format!("line {}, field {}", i + 2, expected[k]),
                    message: format!("'{field}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        location: format!("line {}, field {}", i + 2, expected[k]),
                        message: "coordinate must be finite".into(),
                    });
                }
                row[k] = v;
            }
            matches.push(row);
        }
        Ok(CorrespondenceSet::new(
            matches,
            CorrespondenceSource::ExternalManifest,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["x1", "y1", "x2", "y2"])
            .map_err(|e| csv_error(path, e))?;
        for m in &self.matches {
            w.write_record(m.iter().map(|v| v.to_string()))
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "unknown location".into());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            location,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(stem: &Path, index: &str, blob: &[u8]) {
        std::fs::write(index_path(stem), index).unwrap();
        std::fs::write(blob_path(stem), blob).unwrap();
    }

    fn floats(v: &[f32]) -> Vec<u8> {
        v.iter().flat_map(|x| x.to_le_bytes()).collect()
    }

    #[test]
    fn three_vectors_of_dim_four() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("emb");
        let index = "{\"image_id\":\"a\",\"offset_bytes\":0,\"dim\":4}\n\
                     {\"image_id\":\"b\",\"offset_bytes\":16,\"dim\":4}\n\
                     {\"image_id\":\"c\",\"offset_bytes\":32,\"dim\":4}\n";
        let data: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let blob = floats(&data);
        assert_eq!(blob.len(), 48);
        write_raw(&stem, index, &blob);
        let m = EmbeddingManifest::load(&stem).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.dim, 4);
        assert_eq!(m.get("b").unwrap(), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn truncated_blob_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("emb");
        let index = "{\"image_id\":\"a\",\"offset_bytes\":0,\"dim\":4}\n\
                     {\"image_id\":\"b\",\"offset_bytes\":16,\"dim\":4}\n";
        write_raw(&stem, index, &floats(&[1.0; 6]));
        let err = EmbeddingManifest::load(&stem).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn nan_rejected_with_image_id() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("emb");
        let index = "{\"image_id\":\"good\",\"offset_bytes\":0,\"dim\":2}\n\
                     {\"image_id\":\"bad_one\",\"offset_bytes\":8,\"dim\":2}\n";
        write_raw(&stem, index, &floats(&[1.0, 2.0, f32::NAN, 0.0]));
        let err = EmbeddingManifest::load(&stem).unwrap_err();
        assert!(err.to_string().contains("bad_one"), "{err}");
    }

    #[test]
    fn dim_mismatch_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("emb");
        let index = "{\"image_id\":\"a\",\"offset_bytes\":0,\"dim\":2}\n\
                     {\"image_id\":\"b\",\"offset_bytes\":8,\"dim\":3}\n";
        write_raw(&stem, index, &floats(&[1.0; 5]));
        assert!(matches!(
            EmbeddingManifest::load(&stem),
            Err(Error::DimensionMismatch(_))
        ));
        // blob longer than the index describes
        let index = "{\"image_id\":\"a\",\"offset_bytes\":0,\"dim\":2}\n";
        write_raw(&stem, index, &floats(&[1.0; 3]));
        assert!(matches!(
            EmbeddingManifest::load(&stem),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn header_and_writer_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("emb");
        let header = serde_json::json!({"encoder": "stub", "input_size": 518});
        let entries = vec![
            ("x".to_string(), vec![0.5f32, -1.25]),
            ("y".to_string(), vec![3.0f32, 1e-7]),
        ];
        write_embedding_manifest(&stem, Some(&header), &entries).unwrap();
        let m = EmbeddingManifest::load(&stem).unwrap();
        assert_eq!(m.header.as_ref(), Some(&header));
        assert_eq!(m.get("y").unwrap(), &[3.0, 1e-7]);
    }

    #[test]
    fn keypoint_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let stem = tmp.path().join("kp");
        let kps = vec![
            Keypoint { x: 1.5, y: 2.0, descriptor: vec![1.0, 0.0, 0.0] },
            Keypoint { x: 10.0, y: 20.25, descriptor: vec![0.0, 1.0, 0.0] },
        ];
        let entries = vec![("a".to_string(), kps.clone()), ("b".to_string(), vec![])];
        write_keypoint_manifest(&stem, None, 3, &entries).unwrap();
        let m = KeypointManifest::load(&stem).unwrap();
        assert_eq!(m.get("a").unwrap(), kps.as_slice());
        assert!(m.get("b").unwrap().is_empty());
    }

    #[test]
    fn correspondence_table() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.csv");
        std::fs::write(&path, "x1,y1,x2,y2\n1,2,3,4\n5.5,6,7,8.25\n").unwrap();
        let c = CorrespondenceSet::load(&path).unwrap();
        assert_eq!(c.matches, vec![[1.0, 2.0, 3.0, 4.0], [5.5, 6.0, 7.0, 8.25]]);

        std::fs::write(&path, "1,2,3,4\n").unwrap();
        assert!(CorrespondenceSet::load(&path).is_err());
        std::fs::write(&path, "x1,y1,x2,y2\n1,2,nan,4\n").unwrap();
        assert!(CorrespondenceSet::load(&path).is_err());
    }
}
