//! Dataset-level aggregation and z-score normalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datamodel::{NormalizationScope, NormalizationStats, VariantRecord};
use crate::error::{Error, Result};

/// The selected (aligned or retrieval-best) scores for one real image.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryScore {
    pub real_id: String,
    pub appearance: f64,
    pub geometry: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryTransform {
    /// `ln(1 + mean)`, for count-valued geometry metrics.
    Log1p,
    Identity,
}

/// Mean that does not depend on input order: values are summed in sorted order
/// with Neumaier compensation.
pub fn stable_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    (sum + comp) / values.len() as f64
}

pub fn aggregate_variant(
    variant_id: &str,
    collection: &str,
    scores: &[QueryScore],
    transform: GeometryTransform,
    downstream_score: Option<f64>,
) -> Result<VariantRecord> {
    if scores.is_empty() {
        return Err(Error::Degenerate(format!(
            "variant '{variant_id}' has no scored queries"
        )));
    }
    for s in scores {
        if !s.appearance.is_finite() || !s.geometry.is_finite() {
            return Err(Error::Degenerate(format!(
                "variant '{variant_id}': non-finite score for real image '{}'",
                s.real_id
            )));
        }
    }
    let a: Vec<f64> = scores.iter().map(|s| s.appearance).collect();
    let g: Vec<f64> = scores.iter().map(|s| s.geometry).collect();
    let mean_g = stable_mean(&g);
    let mean_geometry_log = match transform {
        GeometryTransform::Log1p => {
            if mean_g < 0.0 {
                return Err(Error::Degenerate(format!(
                    "variant '{variant_id}': negative mean count {mean_g}"
                )));
            }
            mean_g.ln_1p()
        }
        GeometryTransform::Identity => mean_g,
    };
    Ok(VariantRecord {
        variant_id: variant_id.to_string(),
        collection: collection.to_string(),
        mean_appearance: stable_mean(&a),
        mean_geometry_log,
        downstream_score,
        n_pairs: scores.len(),
    })
}

/// Population mean and standard deviation of the dataset-level scores.
pub fn fit_normalization(variants: &[VariantRecord]) -> Result<NormalizationStats> {
    if variants.len() < 2 {
        return Err(Error::Degenerate(format!(
            "normalization needs at least 2 variants, got {}",
            variants.len()
        )));
    }
    let a: Vec<f64> = variants.iter().map(|v| v.mean_appearance).collect();
    let g: Vec<f64> = variants.iter().map(|v| v.mean_geometry_log).collect();
    let (mu_a, sigma_a) = population_moments(&a);
    let (mu_g, sigma_g) = population_moments(&g);
    if sigma_a <= 0.0 || sigma_g <= 0.0 {
        return Err(Error::Degenerate(format!(
            "zero variance across variants (sigma_a={sigma_a}, sigma_g={sigma_g})"
        )));
    }
    NormalizationStats::new(mu_a, sigma_a, mu_g, sigma_g)
}

fn population_moments(x: &[f64]) -> (f64, f64) {
    let mu = stable_mean(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - mu) * (v - mu)).collect();
    (mu, stable_mean(&dev).sqrt())
}

/// Returns `(a_hat, g_hat)`.
pub fn apply_normalization(v: &VariantRecord, stats: &NormalizationStats) -> (f64, f64) {
    (
        (v.mean_appearance - stats.mu_a) / stats.sigma_a,
        (v.mean_geometry_log - stats.mu_g) / stats.sigma_g,
    )
}

/// One normalized variant, ready for fusion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedVariant {
    pub variant_id: String,
    pub collection: String,
    pub g_hat: f64,
    pub a_hat: f64,
    pub downstream_score: Option<f64>,
}

/// Normalization statistics keyed by collection name; the pooled scope uses
/// a single entry under the empty key.
pub type StatsTable = BTreeMap<String, NormalizationStats>;

pub fn fit_scoped(records: &[VariantRecord], scope: NormalizationScope) -> Result<StatsTable> {
    let mut out = BTreeMap::new();
    match scope {
        NormalizationScope::Pooled => {
            out.insert(String::new(), fit_normalization(records)?);
        }
        NormalizationScope::PerCollection => {
            let mut groups: BTreeMap<&str, Vec<VariantRecord>> = BTreeMap::new();
            for r in records {
                groups.entry(r.collection.as_str()).or_default().push(r.clone());
            }
            for (name, group) in groups {
                let stats = fit_normalization(&group).map_err(|e| {
                    Error::Degenerate(format!("collection '{name}': {e}"))
                })?;
                out.insert(name.to_string(), stats);
            }
        }
    }
    Ok(out)
}

pub fn stats_for<'a>(table: &'a StatsTable, collection: &str) -> Option<&'a NormalizationStats> {
    table.get(collection).or_else(|| table.get(""))
}

pub fn normalize_records(records: &[VariantRecord], table: &StatsTable) -> Result<Vec<NormalizedVariant>> {
    records
        .iter()
        .map(|r| {
            let stats = stats_for(table, &r.collection).ok_or_else(|| {
                Error::Degenerate(format!(
                    "no normalization statistics for collection '{}'",
                    r.collection
                ))
            })?;
            let (a_hat, g_hat) = apply_normalization(r, stats);
            Ok(NormalizedVariant {
                variant_id: r.variant_id.clone(),
                collection: r.collection.clone(),
                g_hat,
                a_hat,
                downstream_score: r.downstream_score,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: f64, g: f64) -> QueryScore {
        QueryScore {
            real_id: "r".into(),
            appearance: a,
            geometry: g,
        }
    }

    fn rec(a: f64, g: f64) -> VariantRecord {
        VariantRecord {
            variant_id: "v".into(),
            collection: "c".into(),
            mean_appearance: a,
            mean_geometry_log: g,
            downstream_score: None,
            n_pairs: 1,
        }
    }

    #[test]
    fn simple_means() {
        let v = aggregate_variant("v", "c", &[q(0.5, 0.0), q(0.7, 0.0)], GeometryTransform::Log1p, None)
            .unwrap();
        assert!((v.mean_appearance - 0.6).abs() < 1e-15);
        assert_eq!(v.mean_geometry_log, 0.0);
        assert_eq!(v.n_pairs, 2);
    }

    #[test]
    fn log_identity() {
        let e = std::f64::consts::E;
        let v = aggregate_variant("v", "c", &[q(0.1, e - 1.0)], GeometryTransform::Log1p, None).unwrap();
        assert!((v.mean_geometry_log - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thousand_queries_match_batch_oracle() {
        // streaming Welford mean as an independent route
        let scores: Vec<QueryScore> = (0..1000)
            .map(|i| {
                let t = i as f64;
                q((t * 0.7311).sin() * 0.4 + 0.5, ((t * 13.0) % 97.0).floor())
            })
            .collect();
        let v = aggregate_variant("v", "c", &scores, GeometryTransform::Log1p, Some(0.3)).unwrap();
        let (mut ma, mut mg) = (0.0f64, 0.0f64);
        for (k, s) in scores.iter().enumerate() {
            ma += (s.appearance - ma) / (k + 1) as f64;
            mg += (s.geometry - mg) / (k + 1) as f64;
        }
        assert!((v.mean_appearance - ma).abs() < 1e-12);
        assert!((v.mean_geometry_log - mg.ln_1p()).abs() < 1e-12);
    }

    #[test]
    fn empty_and_nonfinite_rejected() {
        assert!(aggregate_variant("v", "c", &[], GeometryTransform::Log1p, None).is_err());
        let err = aggregate_variant(
            "v",
            "c",
            &[QueryScore { real_id: "img7".into(), appearance: f64::NAN, geometry: 1.0 }],
            GeometryTransform::Log1p,
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("img7"));
    }

    #[test]
    fn population_sigma() {
        let s = fit_normalization(&[rec(0.0, 1.0), rec(2.0, 3.0)]).unwrap();
        assert_eq!((s.mu_a, s.sigma_a), (1.0, 1.0));
        assert_eq!((s.mu_g, s.sigma_g), (2.0, 1.0));
    }

    #[test]
    fn identical_variants_rejected() {
        assert!(fit_normalization(&[rec(0.5, 1.0), rec(0.5, 1.0)]).is_err());
        assert!(fit_normalization(&[rec(0.5, 1.0)]).is_err());
    }

    #[test]
    fn released_stats_accepted() {
        let s = NormalizationStats::released();
        s.validate().unwrap();
        let (a, g) = apply_normalization(&rec(s.mu_a, s.mu_g), &s);
        assert_eq!((a, g), (0.0, 0.0));
        let (a, g) = apply_normalization(&rec(s.mu_a + s.sigma_a, s.mu_g + s.sigma_g), &s);
        assert!((a - 1.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixture_table_matches_hand_computation() {
        let stats = NormalizationStats::new(0.5, 0.25, 4.0, 2.0).unwrap();
        // (A, G~) -> (A^, G^) computed by hand
        let table = [
            (0.5, 4.0, 0.0, 0.0),
            (0.75, 6.0, 1.0, 1.0),
            (0.0, 0.0, -2.0, -2.0),
            (0.625, 5.0, 0.5, 0.5),
            (0.3, 7.3, -0.8, 1.65),
        ];
        for (a, g, ea, eg) in table {
            let (ah, gh) = apply_normalization(&rec(a, g), &stats);
            assert!((ah - ea).abs() < 1e-12 && (gh - eg).abs() < 1e-12, "{a} {g}");
        }
    }

    proptest! {
        #[test]
        fn normalized_fit_set_is_standard(values in proptest::collection::vec((-5.0f64..5.0, 0.0f64..10.0), 2..20)) {
            let recs: Vec<VariantRecord> = values.iter().map(|&(a, g)| rec(a, g)).collect();
            prop_assume!(fit_normalization(&recs).is_ok());
            let stats = fit_normalization(&recs).unwrap();
            prop_assume!(stats.sigma_a > 1e-6 && stats.sigma_g > 1e-6);
            let z: Vec<(f64, f64)> = recs.iter().map(|r| apply_normalization(r, &stats)).collect();
            let n = z.len() as f64;
            let ma = z.iter().map(|p| p.0).sum::<f64>() / n;
            let mg = z.iter().map(|p| p.1).sum::<f64>() / n;
            let va = z.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
            let vg = z.iter().map(|p| (p.1 - mg).powi(2)).sum::<f64>() / n;
            prop_assert!(ma.abs() < 1e-9 && mg.abs() < 1e-9);
            prop_assert!((va - 1.0).abs() < 1e-9 && (vg - 1.0).abs() < 1e-9);
        }

        #[test]
        fn aggregation_is_permutation_invariant(mut values in proptest::collection::vec((-1.0f64..1.0, 0.0f64..500.0), 1..40), rot in 0usize..40) {
            let make = |v: &[(f64, f64)]| {
                let s: Vec<QueryScore> = v.iter().map(|&(a, g)| q(a, g)).collect();
                aggregate_variant("v", "c", &s, GeometryTransform::Log1p, None).unwrap()
            };
            let before = make(&values);
            let r = rot % values.len();
            values.rotate_left(r);
            values.reverse();
            let after = make(&values);
            prop_assert_eq!(before.mean_appearance.to_bits(), after.mean_appearance.to_bits());
            prop_assert_eq!(before.mean_geometry_log.to_bits(), after.mean_geometry_log.to_bits());
        }

        #[test]
        fn log_is_monotone_and_nonnegative(a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(lo.ln_1p() <= hi.ln_1p());
            prop_assert!(lo.ln_1p() >= 0.0);
        }
    }
}
