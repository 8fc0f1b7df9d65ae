//! Append-only pair-score cache.
//!
//! One JSON record per line:
//! `{"real_id":..,"synth_id":..,"metric_id":..,"value":..,"engine_version":..}`.
//! Lookups only ever return entries written under the requester's engine version.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use log::warn;

use crate::datamodel::types::PairScore;
use crate::error::{Error, Result};

pub const CACHE_FILE: &str = "pair_scores.jsonl";

type Key = (String, String, String, String);

pub struct PairScoreCache {
    engine_version: String,
    entries: RwLock<HashMap<Key, f64>>,
    writer: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl PairScoreCache {
    /// A cache that lives only for the process lifetime.
    pub fn in_memory(engine_version: &str) -> Self {
        PairScoreCache {
            engine_version: engine_version.to_string(),
            entries: RwLock::new(HashMap::new()),
            writer: None,
            path: None,
        }
    }

    /// Opens (creating if needed) `<dir>/pair_scores.jsonl`. Corrupt lines are
    /// skipped with a warning.
    pub fn open(dir: &Path, engine_version: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CACHE_FILE);
        let mut entries = HashMap::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (lineno, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<PairScore>(&line) {
                    Ok(s) if s.value.is_finite() => {
                        entries.insert(
                            (s.real_id, s.synth_id, s.metric_id, s.engine_version),
                            s.value,
                        );
                    }
                    Ok(_) => warn!("{}:{}: skipping non-finite cache record", path.display(), lineno + 1),
                    Err(e) => warn!("{}:{}: skipping corrupt cache record: {e}", path.display(), lineno + 1),
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(PairScoreCache {
            engine_version: engine_version.to_string(),
            entries: RwLock::new(entries),
            writer: Some(Mutex::new(file)),
            path: Some(path),
        })
    }

    pub fn engine_version(&self) -> &str {
        &self.engine_version
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, real_id: &str, synth_id: &str, metric_id: &str) -> Option<PairScore> {
        let key = (
            real_id.to_string(),
            synth_id.to_string(),
            metric_id.to_string(),
            self.engine_version.clone(),
        );
        let value = *self.entries.read().expect("cache lock").get(&key)?;
        Some(PairScore {
            real_id: key.0,
            synth_id: key.1,
            metric_id: key.2,
            value,
            engine_version: key.3,
        })
    }

    /// Records a score under this cache's engine version.
    pub fn put(&self, real_id: &str, synth_id: &str, metric_id: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "refusing to cache non-finite score for {real_id} x {synth_id} [{metric_id}]"
            )));
        }
        let record = PairScore {
            real_id: real_id.to_string(),
            synth_id: synth_id.to_string(),
            metric_id: metric_id.to_string(),
            value,
            engine_version: self.engine_version.clone(),
        };
        if let Some(writer) = &self.writer {
            let mut line = serde_json::to_vec(&record).expect("pair score serializes");
            line.push(b'\n');
            let mut f = writer.lock().expect("cache writer lock");
            f.write_all(&line).map_err(|e| {
                Error::io(self.path.clone().unwrap_or_default(), e)
            })?;
        }
        self.entries.write().expect("cache lock").insert(
            (
                record.real_id,
                record.synth_id,
                record.metric_id,
                record.engine_version,
            ),
            value,
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn absent_before_write() {
        let cache = PairScoreCache::in_memory("1");
        assert!(cache.get("r", "s", "psnr").is_none());
    }

    #[test]
    fn version_mismatch_is_a_miss() {
        let tmp = tempfile::tempdir().unwrap();
        {
            let v1 = PairScoreCache::open(tmp.path(), "1").unwrap();
            v1.put("r", "s", "psnr", 31.5).unwrap();
            assert_eq!(v1.get("r", "s", "psnr").unwrap().value, 31.5);
        }
        let v2 = PairScoreCache::open(tmp.path(), "2").unwrap();
        assert!(v2.get("r", "s", "psnr").is_none());
        let v1 = PairScoreCache::open(tmp.path(), "1").unwrap();
        assert_eq!(v1.get("r", "s", "psnr").unwrap().value, 31.5);
    }

    #[test]
    fn corrupt_lines_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        let good = r#"{"real_id":"r","synth_id":"s","metric_id":"m","value":2.5,"engine_version":"1"}"#;
        std::fs::write(
            tmp.path().join(CACHE_FILE),
            format!("{good}\n{{not json\n{{\"real_id\":\"x\"}}\n"),
        )
        .unwrap();
        let cache = PairScoreCache::open(tmp.path(), "1").unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.get("r", "s", "m").unwrap().value, 2.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(
            proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..20)) {
            let tmp = tempfile::tempdir().unwrap();
            {
                let cache = PairScoreCache::open(tmp.path(), "v").unwrap();
                for (i, v) in values.iter().enumerate() {
                    cache.put(&format!("r{i}"), "s", "m", *v).unwrap();
                }
            }
            let cache = PairScoreCache::open(tmp.path(), "v").unwrap();
            for (i, v) in values.iter().enumerate() {
                let got = cache.get(&format!("r{i}"), "s", "m").unwrap().value;
                prop_assert_eq!(got.to_bits(), v.to_bits());
            }
        }
    }
}
