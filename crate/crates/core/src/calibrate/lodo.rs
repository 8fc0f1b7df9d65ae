//! Leave-one-dataset-out evaluation.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use serde::{Deserialize, Serialize};

use super::fit::{calibrate_records, Calibration};
use super::stats::pearson_or_undefined;
use crate::aggregate::fit_scoped;
use crate::datamodel::{NormalizationScope, VariantRecord};
use crate::error::{Error, Result};
use crate::fusion::FusionEquation;

#[derive(Debug, Clone)]
pub struct LodoOptions {
    pub scope: NormalizationScope,
    pub equation: FusionEquation,
    pub n_starts: usize,
    pub seed: u64,
    /// Normalize with statistics fit on the full benchmark instead of refitting
    /// them on each retained subset.
    pub reuse_full_stats: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoSplit {
    pub excluded: String,
    pub calibration: Calibration,
    /// Pearson r of each single-metric baseline over the retained variants.
    pub baselines: BTreeMap<String, Option<f64>>,
    /// True when the fused score's r is strictly above every baseline's.
    pub fused_ranked_first: bool,
}

/// Fits on all variants whose collection is not `excluded`.
pub fn fit_excluding(
    records: &[VariantRecord],
    excluded: Option<&str>,
    opts: &LodoOptions,
) -> Result<Calibration> {
    let retained: Vec<VariantRecord> = records
        .iter()
        .filter(|r| Some(r.collection.as_str()) != excluded)
        .cloned()
        .collect();
    let full_stats = if opts.reuse_full_stats {
        Some(fit_scoped(records, opts.scope)?)
    } else {
        None
    };
    calibrate_records(
        &retained,
        opts.scope,
        opts.equation,
        opts.n_starts,
        opts.seed,
        full_stats.as_ref(),
    )
}

/// Runs one split per collection. `baselines` maps a metric name to one raw
/// value per record (same order as `records`).
pub fn leave_one_out(
    records: &[VariantRecord],
    baselines: &BTreeMap<String, Vec<f64>>,
    opts: &LodoOptions,
) -> Result<Vec<LodoSplit>> {
    let collections: BTreeSet<&str> = records.iter().map(|r| r.collection.as_str()).collect();
    if collections.len() < 3 {
        return Err(Error::Degenerate(format!(
            "leave-one-out needs at least 3 datasets, got {}",
            collections.len()
        )));
    }
    for (name, values) in baselines {
        if values.len() != records.len() {
            return Err(Error::DimensionMismatch(format!(
                "baseline '{name}' has {} values for {} variants",
                values.len(),
                records.len()
            )));
        }
    }
    let mut splits = Vec::new();
    for excluded in collections {
        let keep: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].collection != excluded)
            .collect();
        if keep.len() < 3 {
            warn!("skipping exclusion of '{excluded}': only {} variants remain", keep.len());
            continue;
        }
        let calibration = fit_excluding(records, Some(excluded), opts)?;
        let y: Vec<f64> = calibration.variants.iter().map(|v| v.downstream_score.unwrap_or(f64::NAN)).collect();
        let baseline_r: BTreeMap<String, Option<f64>> = baselines
            .iter()
            .map(|(name, values)| {
                let x: Vec<f64> = keep.iter().map(|&i| values[i]).collect();
                (name.clone(), pearson_or_undefined(&x, &y))
            })
            .collect();
        let fused = calibration.report.pearson_r;
        let fused_ranked_first = baseline_r.values().all(|r| r.is_none_or(|r| fused > r));
        splits.push(LodoSplit {
            excluded: excluded.to_string(),
            calibration,
            baselines: baseline_r,
            fused_ranked_first,
        });
    }
    Ok(splits)
}
