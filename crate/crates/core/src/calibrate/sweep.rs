//! Sweeps over pool size and over appearance × geometry metric choices.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::fit::{calibrate_records, Calibration};
use crate::datamodel::{NormalizationScope, VariantRecord};
use crate::error::Result;
use crate::fusion::FusionEquation;

#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    pub scope: NormalizationScope,
    pub equation: FusionEquation,
    pub n_starts: usize,
    pub seed: u64,
}

impl FitSettings {
    pub fn calibrate(&self, records: &[VariantRecord]) -> Result<Calibration> {
        calibrate_records(records, self.scope, self.equation, self.n_starts, self.seed, None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepEntry {
    pub k: usize,
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub params: Vec<f64>,
}

/// Refits at each pool size. `records_for_k` rebuilds the variant table for one k.
pub fn k_sensitivity_sweep(
    ks: &[usize],
    settings: &FitSettings,
    mut records_for_k: impl FnMut(usize) -> Result<Vec<VariantRecord>>,
) -> Result<Vec<KSweepEntry>> {
    let mut sorted = ks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.as_slice() != ks {
        warn!("pool sizes {ks:?} reordered to {sorted:?}");
    }
    let mut out = Vec::with_capacity(sorted.len());
    for k in sorted {
        let records = records_for_k(k)?;
        let cal = settings.calibrate(&records)?;
        out.push(KSweepEntry {
            k,
            pearson_r: cal.report.pearson_r,
            spearman_rho: cal.report.spearman_rho,
            params: cal.fit.model.params,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSweep {
    pub geometry_metrics: Vec<String>,
    pub appearance_metrics: Vec<String>,
    /// `r[g][a]`; `None` where the cell could not be computed.
    pub r: Vec<Vec<Option<f64>>>,
    pub best: Option<(usize, usize)>,
    pub failures: BTreeMap<String, String>,
}

/// Fits every geometry × appearance combination. A failing cell is recorded
/// and skipped.
pub fn component_sweep(
    appearance_metrics: &[String],
    geometry_metrics: &[String],
    settings: &FitSettings,
    mut records_for: impl FnMut(&str, &str) -> Result<Vec<VariantRecord>>,
) -> ComponentSweep {
    let mut r = vec![vec![None; appearance_metrics.len()]; geometry_metrics.len()];
    let mut failures = BTreeMap::new();
    let mut best: Option<(usize, usize)> = None;
    for (gi, g) in geometry_metrics.iter().enumerate() {
        for (ai, a) in appearance_metrics.iter().enumerate() {
            let cell = records_for(a, g).and_then(|recs| settings.calibrate(&recs));
            match cell {
                Ok(cal) => {
                    let v = cal.report.pearson_r;
                    r[gi][ai] = Some(v);
                    if best.is_none_or(|(bg, ba)| v > r[bg][ba].expect("scored")) {
                        best = Some((gi, ai));
                    }
                }
                Err(e) => {
                    warn!("sweep cell {g} x {a} unavailable: {e}");
                    failures.insert(format!("{g} x {a}"), e.to_string());
                }
            }
        }
    }
    ComponentSweep {
        geometry_metrics: geometry_metrics.to_vec(),
        appearance_metrics: appearance_metrics.to_vec(),
        r,
        best,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> FitSettings {
        FitSettings {
            scope: NormalizationScope::Pooled,
            equation: FusionEquation::ConstrainedPolynomial,
            n_starts: 10,
            seed: 5,
        }
    }

    /// Variants with latent quality (qa, qg); `informative` geometry tracks qg.
    fn records(geometry: &str, seed: u64) -> Vec<VariantRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed ^ geometry.len() as u64 ^ 0x55);
        (0..15)
            .map(|i| {
                let qa: f64 = rng.gen_range(0.2..1.0);
                let qg: f64 = rng.gen_range(0.2..1.0);
                let g = if geometry == "informative" { 1.0 + 3.0 * qg } else { noise.gen_range(1.0..4.0) };
                VariantRecord {
                    variant_id: format!("v{i}"),
                    collection: "c".into(),
                    mean_appearance: qa,
                    mean_geometry_log: g,
                    downstream_score: Some(qa * qg),
                    n_pairs: 5,
                }
            })
            .collect()
    }

    #[test]
    fn single_cell_equals_direct_fit() {
        let sweep = component_sweep(&["cos".into()], &["informative".into()], &settings(), |_, g| Ok(records(g, 1)));
        let direct = settings().calibrate(&records("informative", 1)).unwrap();
        assert_eq!(sweep.r[0][0], Some(direct.report.pearson_r));
        assert_eq!(sweep.best, Some((0, 0)));
    }

    #[test]
    fn informative_metric_wins() {
        let geos: Vec<String> = ["decoy_a", "informative", "decoy_bb", "decoy_ccc"].map(String::from).to_vec();
        let sweep = component_sweep(&["cos".into()], &geos, &settings(), |_, g| Ok(records(g, 2)));
        assert_eq!(sweep.best, Some((1, 0)));
    }

    #[test]
    fn failing_cell_skipped() {
        let sweep = component_sweep(&["a1".into(), "a2".into()], &["informative".into()], &settings(), |a, g| {
            if a == "a2" {
                Err(Error::Validation("missing manifest".into()))
            } else {
                Ok(records(g, 3))
            }
        });
        assert!(sweep.r[0][0].is_some());
        assert_eq!(sweep.r[0][1], None);
        assert_eq!(sweep.failures.len(), 1);
    }

    #[test]
    fn single_k() {
        let out = k_sensitivity_sweep(&[1], &settings(), |_| Ok(records("informative", 4))).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].k, 1);
    }
}
