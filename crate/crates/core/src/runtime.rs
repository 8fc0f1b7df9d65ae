//! Per-metric throughput on a fixed set of pairs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Engine;

pub const RUNTIME_FILE: &str = "runtime.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub metric: String,
    /// One-time setup: manifest loading for descriptor metrics.
    pub load_s: f64,
    /// Scoring every pair sequentially, image decoding included.
    pub total_s: f64,
    pub pairs: usize,
    pub pairs_per_s: Option<f64>,
    pub device: String,
    pub error: Option<String>,
}

/// Times each metric over the first `n_pairs` plan pairs, bypassing the cache.
/// A failing metric gets a row with its error instead of timings.
pub fn run_bench(engine: &Engine, metrics: &[String], n_pairs: usize, device: &str) -> Result<Vec<RuntimeRow>> {
    if metrics.is_empty() {
        return Ok(Vec::new());
    }
    let pairs = engine.plan_pairs(n_pairs)?;
    if pairs.len() < n_pairs {
        log::warn!("only {} pairs available, {} requested", pairs.len(), n_pairs);
    }
    let mut dirs: Vec<&Path> = Vec::new();
    for (r, s, _) in &pairs {
        for d in [r.dir.as_path(), s.dir.as_path()] {
            if !dirs.contains(&d) {
                dirs.push(d);
            }
        }
    }
    let mut rows = Vec::with_capacity(metrics.len());
    for m in metrics {
        let mut row = RuntimeRow {
            metric: m.clone(),
            load_s: 0.0,
            total_s: 0.0,
            pairs: pairs.len(),
            pairs_per_s: None,
            device: device.to_string(),
            error: None,
        };
        let t0 = Instant::now();
        if let Err(e) = engine.load_metric_resources(m, &dirs) {
            row.error = Some(e.to_string());
            rows.push(row);
            continue;
        }
        row.load_s = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let failed = pairs
            .iter()
            .find_map(|(r, s, vdir)| engine.score_pair(m, r, s, vdir).err());
        row.total_s = t1.elapsed().as_secs_f64();
        match failed {
            Some(e) => row.error = Some(e.to_string()),
            None if row.total_s > 0.0 => row.pairs_per_s = Some(pairs.len() as f64 / row.total_s),
            None => {}
        }
        log::info!("bench {m}: {:.3}s for {} pairs", row.total_s, row.pairs);
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_runtime_table(path: &Path, rows: &[RuntimeRow]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let fmt = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["metric", "load_s", "total_s", "pairs", "pairs_per_s", "device", "error"])
        .map_err(fmt)?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            format!("{:.4}", r.load_s),
            format!("{:.4}", r.total_s),
            r.pairs.to_string(),
            r.pairs_per_s.map(|v| format!("{v:.2}")).unwrap_or_default(),
            r.device.clone(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Plain-text table in the column layout `Metric | Load | Total | Pairs/s`.
pub fn format_runtime_table(rows: &[RuntimeRow]) -> String {
    let mut s = format!("{:<12} {:>10} {:>10} {:>10}\n", "Metric", "Load (s)", "Total (s)", "Pairs/s");
    for r in rows {
        match (&r.error, r.pairs_per_s) {
            (Some(e), _) => s.push_str(&format!("{:<12} failed: {e}\n", r.metric)),
            (None, pps) => s.push_str(&format!(
                "{:<12} {:>10.3} {:>10.3} {:>10}\n",
                r.metric,
                r.load_s,
                r.total_s,
                pps.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
            )),
        }
    }
    s
}
