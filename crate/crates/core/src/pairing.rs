//! Real-to-synthetic pairing: aligned one-to-one maps, or per-query candidate
//! pools sampled uniformly without replacement for retrieval.

use std::collections::{HashMap, HashSet};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::table::read_pair_map;
use crate::datamodel::{BenchmarkConfig, Collection, PairingMode};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub real_id: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub variant_id: String,
    pub mode: PairingMode,
    pub queries: Vec<Query>,
    /// Effective pool size after clamping to the synthetic set size (1 for aligned).
    pub pool_size_k: usize,
    pub rng_seed: u64,
}

impl PairingPlan {
    pub fn n_pairs(&self) -> usize {
        self.queries.iter().map(|q| q.candidates.len()).sum()
    }
}

/// Inputs for plan construction, decoupled from the filesystem.
#[derive(Debug, Clone)]
pub struct PlanRequest<'a> {
    pub variant_id: &'a str,
    pub mode: PairingMode,
    pub real_ids: &'a [String],
    pub synth_ids: &'a [String],
    pub pair_map: Option<&'a [(String, String)]>,
    pub pool_size_k: usize,
    pub max_queries: usize,
    pub rng_seed: u64,
}

/// Indices of `max` evenly spaced items out of `n` (all of them when `n <= max`).
pub fn evenly_spaced(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|i| i * n / max).collect()
}

pub fn plan(req: &PlanRequest<'_>) -> Result<PairingPlan> {
    if req.max_queries == 0 {
        return Err(Error::Validation("max_queries must be >= 1".into()));
    }
    let mut real: Vec<&String> = req.real_ids.iter().collect();
    real.sort();
    real.dedup();
    let selected: Vec<&String> = evenly_spaced(real.len(), req.max_queries)
        .into_iter()
        .map(|i| real[i])
        .collect();

    let mut synth: Vec<&String> = req.synth_ids.iter().collect();
    synth.sort();
    synth.dedup();

    match req.mode {
        PairingMode::Aligned => {
            let map = req.pair_map.ok_or_else(|| {
                Error::Validation(format!(
                    "variant '{}': aligned pairing requires a pair map",
                    req.variant_id
                ))
            })?;
            let lookup: HashMap<&str, &str> =
                map.iter().map(|(r, s)| (r.as_str(), s.as_str())).collect();
            let known: HashSet<&str> = synth.iter().map(|s| s.as_str()).collect();
            let mut queries = Vec::with_capacity(selected.len());
            for r in selected {
                let s = lookup.get(r.as_str()).ok_or_else(|| {
                    Error::Validation(format!(
                        "variant '{}': real image '{r}' has no aligned counterpart",
                        req.variant_id
                    ))
                })?;
                if !known.contains(s) {
                    return Err(Error::Validation(format!(
                        "variant '{}': counterpart '{s}' of real image '{r}' is not in the synthetic set",
                        req.variant_id
                    )));
                }
                queries.push(Query {
                    real_id: r.clone(),
                    candidates: vec![s.to_string()],
                });
            }
            Ok(PairingPlan {
                variant_id: req.variant_id.to_string(),
                mode: PairingMode::Aligned,
                queries,
                pool_size_k: 1,
                rng_seed: req.rng_seed,
            })
        }
        PairingMode::Retrieval => {
            if req.pool_size_k == 0 {
                return Err(Error::Validation("retrieval requires pool_size_k >= 1".into()));
            }
            if synth.is_empty() {
                return Err(Error::Validation(format!(
                    "variant '{}': synthetic set is empty",
                    req.variant_id
                )));
            }
            let k = if req.pool_size_k > synth.len() {
                warn!(
                    "variant '{}': pool size {} exceeds synthetic set size {}; clamping",
                    req.variant_id,
                    req.pool_size_k,
                    synth.len()
                );
                synth.len()
            } else {
                req.pool_size_k
            };
            let queries = selected
                .into_iter()
                .map(|r| Query {
                    real_id: r.clone(),
                    candidates: sample_pool(&synth, k, req.rng_seed, req.variant_id, r),
                })
                .collect();
            Ok(PairingPlan {
                variant_id: req.variant_id.to_string(),
                mode: PairingMode::Retrieval,
                queries,
                pool_size_k: k,
                rng_seed: req.rng_seed,
            })
        }
    }
}

/// Partial Fisher-Yates shuffle keyed by (variant, real image). Pools for
/// smaller `k` are prefixes of pools for larger `k`.
fn sample_pool(synth: &[&String], k: usize, seed: u64, variant: &str, real: &str) -> Vec<String> {
    let mut rng = rng_for(seed, &format!("pool/{variant}/{real}"));
    let mut idx: Vec<usize> = (0..synth.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    idx[..k].iter().map(|&i| synth[i].clone()).collect()
}

/// Builds the plan for one variant of a loaded benchmark, optionally
/// overriding the collection's pool size.
pub fn build_pairing_plan(
    config: &BenchmarkConfig,
    variant_id: &str,
    k_override: Option<usize>,
) -> Result<PairingPlan> {
    let collection = config.collection_of(variant_id).ok_or_else(|| {
        Error::Validation(format!("variant '{variant_id}' is not declared in the config"))
    })?;
    build_collection_plan(collection, variant_id, k_override)
}

pub fn build_collection_plan(
    collection: &Collection,
    variant_id: &str,
    k_override: Option<usize>,
) -> Result<PairingPlan> {
    let variant = collection.variant(variant_id).ok_or_else(|| {
        Error::Validation(format!(
            "variant '{variant_id}' is not part of collection '{}'",
            collection.name
        ))
    })?;
    let real_ids: Vec<String> = collection
        .real_images()?
        .into_iter()
        .map(|i| i.image_id)
        .collect();
    let synth_ids: Vec<String> = variant
        .images(&collection.name)?
        .into_iter()
        .map(|i| i.image_id)
        .collect();
    let pair_map = match &variant.pair_map {
        Some(p) => Some(read_pair_map(p)?),
        None => None,
    };
    plan(&PlanRequest {
        variant_id,
        mode: collection.pairing,
        real_ids: &real_ids,
        synth_ids: &synth_ids,
        pair_map: pair_map.as_deref(),
        pool_size_k: k_override.unwrap_or(collection.pool_size_k),
        max_queries: collection.max_queries,
        rng_seed: collection.rng_seed,
    })
}

/// Best-scoring candidate of a pool. Ties keep the earliest candidate in plan
/// order; candidates whose scoring fails are skipped unless all of them fail.
pub fn retrieval_best<F>(real_id: &str, candidates: &[String], mut score_fn: F) -> Result<(String, f64)>
where
    F: FnMut(&str) -> Result<f64>,
{
    if candidates.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "real image '{real_id}' has an empty candidate pool"
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut failures = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        match score_fn(c) {
            Ok(v) if v.is_finite() => {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((i, v));
                }
            }
            Ok(v) => failures.push(format!("{c}: non-finite score {v}")),
            Err(e) => failures.push(format!("{c}: {e}")),
        }
    }
    match best {
        Some((i, v)) => {
            if !failures.is_empty() {
                warn!("real image '{real_id}': {} candidate(s) failed to score", failures.len());
            }
            Ok((candidates[i].clone(), v))
        }
        None => Err(Error::pipeline(
            "pairing",
            format!("real image '{real_id}'"),
            format!("all candidates failed: {}", failures.join("; ")),
        )),
    }
}
