//! Benchmark configuration.
//!
//! The configuration is a TOML document. Relative paths resolve against the
//! directory holding the config file, then against each collection's `root`.
//!
//! ```toml
//! seed = 2024
//!
//! [[metric]]
//! id = "emb"
//! kind = "embedding_cosine"
//! manifest = "emb"
//!
//! [[metric]]
//! id = "kp"
//! kind = "keypoint_inliers"
//! manifest = "kp"
//!
//! [fusion]
//! appearance = "emb"
//! geometry = "kp"
//!
//! [[collection]]
//! name = "desk"
//! root = "desk"
//! real = "real"
//! pairing = "retrieval"
//! pool_size_k = 10
//! max_queries = 1000
//!
//! [[collection.variant]]
//! id = "desk_v0"
//! dir = "v0"
//! downstream_score = 0.71
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::types::{Domain, ImageRef};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    Aligned,
    Retrieval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    #[default]
    Luma,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Psnr,
    Ssim,
    EmbeddingCosine,
    /// Mutual-NN matching of keypoint descriptors followed by RANSAC.
    KeypointInliers,
    /// RANSAC over externally supplied correspondence tables.
    CorrespondenceInliers,
}

impl MetricKind {
    /// Count-valued metrics are log-stabilized when used on the geometry axis.
    pub fn is_count(self) -> bool {
        matches!(
            self,
            MetricKind::KeypointInliers | MetricKind::CorrespondenceInliers
        )
    }

    pub fn needs_pixels(self) -> bool {
        matches!(self, MetricKind::Psnr | MetricKind::Ssim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub id: String,
    pub kind: MetricKind,
    /// Manifest stem (`<stem>.index` + `<stem>.blob`) inside every dataset directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    /// Directory (inside each variant dir) of `<real>__<synth>.csv` correspondence tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches_dir: Option<String>,
    #[serde(default)]
    pub channels: ChannelMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    /// Statistics fit separately over each real dataset's synthetic variants.
    #[default]
    PerCollection,
    /// One set of statistics over all variants.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSettings {
    pub appearance: String,
    pub geometry: String,
    #[serde(default)]
    pub normalization: NormalizationScope,
    #[serde(default = "default_starts")]
    pub n_starts: usize,
}

fn default_starts() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub id: String,
    pub dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionSpec {
    pub name: String,
    #[serde(default)]
    pub root: PathBuf,
    pub real: PathBuf,
    pub pairing: PairingMode,
    #[serde(default = "default_k")]
    pub pool_size_k: usize,
    #[serde(default = "default_max_queries")]
    pub max_queries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(default, rename = "variant")]
    pub variants: Vec<VariantSpec>,
}

fn default_k() -> usize {
    10
}

fn default_max_queries() -> usize {
    1000
}

/// The config file as written, before path resolution and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, rename = "metric")]
    pub metrics: Vec<MetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionSettings>,
    #[serde(default, rename = "collection")]
    pub collections: Vec<CollectionSpec>,
}

impl ConfigDocument {
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// A validated benchmark. Paths inside are absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub metrics: Vec<MetricSpec>,
    pub fusion: Option<FusionSettings>,
    pub collections: Vec<Collection>,
    /// SHA-256 of the config file bytes as loaded.
    pub source_hash: String,
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub name: String,
    pub real_dir: PathBuf,
    pub pairing: PairingMode,
    pub pool_size_k: usize,
    pub max_queries: usize,
    pub rng_seed: u64,
    pub variants: Vec<Variant>,
    /// Seed as written in the file, kept for re-serialization.
    explicit_seed: Option<u64>,
    root: PathBuf,
    real_rel: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub id: String,
    pub dir: PathBuf,
    pub downstream_score: Option<f64>,
    pub pair_map: Option<PathBuf>,
    dir_rel: PathBuf,
    pair_map_rel: Option<PathBuf>,
}

impl Collection {
    pub fn real_images(&self) -> Result<Vec<ImageRef>> {
        list_images(&self.real_dir, &format!("{}/real", self.name), Domain::Real)
    }

    pub fn variant(&self, id: &str) -> Option<&Variant> {
        self.variants.iter().find(|v| v.id == id)
    }
}

impl Variant {
    pub fn images(&self, collection: &str) -> Result<Vec<ImageRef>> {
        list_images(
            &self.dir,
            &format!("{collection}/{}", self.id),
            Domain::Synthetic,
        )
    }
}

impl BenchmarkConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let base = if base.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            base
        };
        Self::parse(&text, path, &base)
    }

    /// Parses and validates config text; `origin` is only used in error messages.
    pub fn parse(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let raw: ConfigDocument = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "unknown location".to_string(),
            };
            Error::Parse {
                path: origin.to_path_buf(),
                location,
                message: e.message().to_string(),
            }
        })?;
        let mut cfg = Self::from_raw(raw, base_dir)?;
        cfg.source_hash = crate::seed::sha256_hex(text.as_bytes());
        Ok(cfg)
    }

    fn from_raw(raw: ConfigDocument, base_dir: &Path) -> Result<Self> {
        if raw.collections.is_empty() {
            return Err(Error::Validation("config declares no collections".into()));
        }
        let mut metric_ids = HashSet::new();
        for m in &raw.metrics {
            if !metric_ids.insert(m.id.clone()) {
                return Err(Error::Validation(format!("duplicate metric id '{}'", m.id)));
            }
            match m.kind {
                MetricKind::EmbeddingCosine | MetricKind::KeypointInliers
                    if m.manifest.is_none() =>
                {
                    return Err(Error::Validation(format!(
                        "metric '{}': field 'manifest' is required for {:?}",
                        m.id, m.kind
                    )))
                }
                MetricKind::CorrespondenceInliers if m.matches_dir.is_none() => {
                    return Err(Error::Validation(format!(
                        "metric '{}': field 'matches_dir' is required",
                        m.id
                    )))
                }
                _ => {}
            }
        }
        if let Some(f) = &raw.fusion {
            for id in [&f.appearance, &f.geometry] {
                if !metric_ids.contains(id) {
                    return Err(Error::Validation(format!(
                        "fusion references unknown metric '{id}'"
                    )));
                }
            }
            if f.n_starts == 0 {
                return Err(Error::Validation("fusion.n_starts must be >= 1".into()));
            }
        }

        let mut names = HashSet::new();
        let mut variant_ids = HashSet::new();
        let mut collections = Vec::with_capacity(raw.collections.len());
        for c in raw.collections {
            if !names.insert(c.name.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate collection name '{}'",
                    c.name
                )));
            }
            if c.variants.is_empty() {
                return Err(Error::Validation(format!(
                    "collection '{}': variant list is empty",
                    c.name
                )));
            }
            if c.max_queries == 0 {
                return Err(Error::Validation(format!(
                    "collection '{}': max_queries must be >= 1",
                    c.name
                )));
            }
            if c.pairing == PairingMode::Retrieval && c.pool_size_k == 0 {
                return Err(Error::Validation(format!(
                    "collection '{}': retrieval mode requires pool_size_k >= 1",
                    c.name
                )));
            }
            let root = base_dir.join(&c.root);
            let real_dir = root.join(&c.real);
            ensure_dir(&real_dir, &format!("collection '{}' real dataset", c.name))?;
            let mut variants = Vec::with_capacity(c.variants.len());
            for v in c.variants {
                if !variant_ids.insert(v.id.clone()) {
                    return Err(Error::Validation(format!("duplicate variant id '{}'", v.id)));
                }
                let dir = root.join(&v.dir);
                ensure_dir(&dir, &format!("variant '{}'", v.id))?;
                if let Some(y) = v.downstream_score {
                    if !y.is_finite() {
                        return Err(Error::Validation(format!(
                            "variant '{}': downstream_score must be finite",
                            v.id
                        )));
                    }
                }
                let pair_map = match (&v.pair_map, c.pairing) {
                    (None, PairingMode::Aligned) => {
                        return Err(Error::Validation(format!(
                            "variant '{}': aligned pairing requires a pair_map",
                            v.id
                        )))
                    }
                    (Some(p), _) => {
                        let full = root.join(p);
                        if !full.is_file() {
                            return Err(Error::Validation(format!(
                                "variant '{}': pair map {} does not exist",
                                v.id,
                                full.display()
                            )));
                        }
                        Some(full)
                    }
                    (None, _) => None,
                };
                variants.push(Variant {
                    id: v.id,
                    dir,
                    downstream_score: v.downstream_score,
                    pair_map,
                    dir_rel: v.dir,
                    pair_map_rel: v.pair_map,
                });
            }
            let rng_seed = c
                .rng_seed
                .unwrap_or_else(|| derive_seed(raw.seed, &format!("pairing/{}", c.name)));
            collections.push(Collection {
                name: c.name,
                real_dir,
                pairing: c.pairing,
                pool_size_k: c.pool_size_k,
                max_queries: c.max_queries,
                rng_seed,
                variants,
                explicit_seed: c.rng_seed,
                root: c.root,
                real_rel: c.real,
            });
        }

        Ok(BenchmarkConfig {
            seed: raw.seed,
            metrics: raw.metrics,
            fusion: raw.fusion,
            collections,
            source_hash: String::new(),
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// Replaces the top-level seed and re-derives collection seeds that were
    /// not pinned in the file.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for c in &mut self.collections {
            if c.explicit_seed.is_none() {
                c.rng_seed = derive_seed(seed, &format!("pairing/{}", c.name));
            }
        }
        self
    }

    pub fn metric(&self, id: &str) -> Option<&MetricSpec> {
        self.metrics.iter().find(|m| m.id == id)
    }

    pub fn collection(&self, name: &str) -> Option<&Collection> {
        self.collections.iter().find(|c| c.name == name)
    }

    /// Collection owning `variant_id`.
    pub fn collection_of(&self, variant_id: &str) -> Option<&Collection> {
        self.collections
            .iter()
            .find(|c| c.variants.iter().any(|v| v.id == variant_id))
    }

    pub fn downstream_scores(&self) -> BTreeMap<String, f64> {
        self.collections
            .iter()
            .flat_map(|c| c.variants.iter())
            .filter_map(|v| v.downstream_score.map(|y| (v.id.clone(), y)))
            .collect()
    }

    /// Canonical TOML rendering with relative paths as written in the source.
    pub fn to_toml_string(&self) -> String {
        let raw = ConfigDocument {
            seed: self.seed,
            metrics: self.metrics.clone(),
            fusion: self.fusion.clone(),
            collections: self
                .collections
                .iter()
                .map(|c| CollectionSpec {
                    name: c.name.clone(),
                    root: c.root.clone(),
                    real: c.real_rel.clone(),
                    pairing: c.pairing,
                    pool_size_k: c.pool_size_k,
                    max_queries: c.max_queries,
                    rng_seed: c.explicit_seed,
                    variants: c
                        .variants
                        .iter()
                        .map(|v| VariantSpec {
                            id: v.id.clone(),
                            dir: v.dir_rel.clone(),
                            downstream_score: v.downstream_score,
                            pair_map: v.pair_map_rel.clone(),
                        })
                        .collect(),
                })
                .collect(),
        };
        raw.to_toml_string()
    }
}

fn ensure_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{what}: directory {} does not exist",
            path.display()
        )))
    }
}

/// Lists raster files in `dir`, sorted by image id (file stem).
pub fn list_images(dir: &Path, dataset_id: &str, domain: Domain) -> Result<Vec<ImageRef>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut images = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if !is_image || !path.is_file() {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        images.push(ImageRef {
            dataset_id: dataset_id.to_string(),
            image_id: stem.to_string(),
            path,
            domain,
        });
    }
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for w in images.windows(2) {
        if w[0].image_id == w[1].image_id {
            return Err(Error::Validation(format!(
                "{}: duplicate image id '{}'",
                dir.display(),
                w[0].image_id
            )));
        }
    }
    Ok(images)
}
