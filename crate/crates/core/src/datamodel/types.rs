use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag stamped on every cached pair score. Bump whenever a metric
/// constant or metric implementation changes so stale cache entries are never reused.
pub const ENGINE_VERSION: &str = "sadge-engine-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRef {
    pub dataset_id: String,
    pub image_id: String,
    pub path: PathBuf,
    pub domain: Domain,
}

impl ImageRef {
    /// `dataset_id/image_id`, the identifier used for cache keys.
    pub fn qualified_id(&self) -> String {
        format!("{}/{}", self.dataset_id, self.image_id)
    }
}

/// One (real image, synthetic image, metric) measurement in metric-native units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub real_id: String,
    pub synth_id: String,
    pub metric_id: String,
    pub value: f64,
    pub engine_version: String,
}

/// Dataset-level (mean appearance, log-stabilized mean geometry, downstream score)
/// triple for one synthetic variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub variant_id: String,
    /// Real-dataset collection the variant belongs to; empty when unknown.
    #[serde(default)]
    pub collection: String,
    pub mean_appearance: f64,
    pub mean_geometry_log: f64,
    pub downstream_score: Option<f64>,
    pub n_pairs: usize,
}

impl VariantRecord {
    pub fn validate(&self) -> Result<()> {
        if self.n_pairs == 0 {
            return Err(Error::Validation(format!(
                "variant {}: n_pairs must be >= 1",
                self.variant_id
            )));
        }
        if !self.mean_appearance.is_finite() || !self.mean_geometry_log.is_finite() {
            return Err(Error::Validation(format!(
                "variant {}: non-finite dataset-level score",
                self.variant_id
            )));
        }
        if let Some(y) = self.downstream_score {
            if !y.is_finite() {
                return Err(Error::Validation(format!(
                    "variant {}: non-finite downstream score",
                    self.variant_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mu_a: f64,
    pub sigma_a: f64,
    pub mu_g: f64,
    pub sigma_g: f64,
}

impl NormalizationStats {
    pub fn new(mu_a: f64, sigma_a: f64, mu_g: f64, sigma_g: f64) -> Result<Self> {
        let stats = NormalizationStats {
            mu_a,
            sigma_a,
            mu_g,
            sigma_g,
        };
        stats.validate()?;
        Ok(stats)
    }

    /// Statistics shipped with the reference configuration (DINOv3 appearance,
    /// MASt3R geometry, fit on 15 variants).
    pub fn released() -> Self {
        NormalizationStats {
            mu_a: 0.6359,
            sigma_a: 0.1918,
            mu_g: 7.9420,
            sigma_g: 1.7384,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_a, self.sigma_a, self.mu_g, self.sigma_g];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite normalization statistic".into()));
        }
        if self.sigma_a <= 0.0 || self.sigma_g <= 0.0 {
            return Err(Error::Degenerate(format!(
                "normalization requires positive spread (sigma_a={}, sigma_g={})",
                self.sigma_a, self.sigma_g
            )));
        }
        Ok(())
    }
}
