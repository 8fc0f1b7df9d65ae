//! End-to-end scoring: pairing plans, per-pair metrics through the cache,
//! retrieval-best selection, and dataset-level aggregation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_variant, stable_mean, GeometryTransform, QueryScore};
use crate::datamodel::manifest::{blob_path, index_path};
use crate::datamodel::{
    BenchmarkConfig, Collection, CorrespondenceSet, EmbeddingManifest, KeypointManifest, MetricKind,
    MetricSpec, PairScoreCache, VariantRecord,
};
use crate::error::{Error, Result};
use crate::metrics::matching::mutual_nn_matches;
use crate::metrics::{cosine_similarity_f32, psnr, ransac_inlier_count, ssim, RansacParams, Raster};
use crate::pairing::{build_collection_plan, PairingPlan};
use crate::seed::derive_seed;

/// Root for per-pair RANSAC seeds; pair seeds depend only on the pair ids so
/// cached scores stay valid whatever the run seed.
const RANSAC_SEED_ROOT: u64 = 0x5AD6_E000_0000_0001;

pub fn ransac_seed(real_qid: &str, synth_qid: &str) -> u64 {
    derive_seed(RANSAC_SEED_ROOT, &format!("{real_qid}|{synth_qid}"))
}

pub fn geometry_transform(kind: MetricKind) -> GeometryTransform {
    if kind.is_count() {
        GeometryTransform::Log1p
    } else {
        GeometryTransform::Identity
    }
}

/// Where one image lives and how it is keyed.
#[derive(Debug, Clone)]
pub struct ImageSlot {
    pub dir: PathBuf,
    pub image_id: String,
    pub qualified_id: String,
}

impl ImageSlot {
    fn image_path(&self) -> Result<PathBuf> {
        for ext in ["png", "jpg", "jpeg", "bmp"] {
            let p = self.dir.join(format!("{}.{ext}", self.image_id));
            if p.exists() {
                return Ok(p);
            }
        }
        Err(Error::Validation(format!(
            "image '{}' not found in {}",
            self.image_id,
            self.dir.display()
        )))
    }
}

#[derive(Default)]
struct ManifestStore {
    embeddings: Mutex<HashMap<PathBuf, Arc<EmbeddingManifest>>>,
    keypoints: Mutex<HashMap<PathBuf, Arc<KeypointManifest>>>,
}

impl ManifestStore {
    fn embedding(&self, stem: &Path) -> Result<Arc<EmbeddingManifest>> {
        let mut map = self.embeddings.lock().expect("manifest lock");
        if let Some(m) = map.get(stem) {
            return Ok(m.clone());
        }
        let m = Arc::new(EmbeddingManifest::load(stem)?);
        map.insert(stem.to_path_buf(), m.clone());
        Ok(m)
    }

    fn keypoints(&self, stem: &Path) -> Result<Arc<KeypointManifest>> {
        let mut map = self.keypoints.lock().expect("manifest lock");
        if let Some(m) = map.get(stem) {
            return Ok(m.clone());
        }
        let m = Arc::new(KeypointManifest::load(stem)?);
        map.insert(stem.to_path_buf(), m.clone());
        Ok(m)
    }
}

/// Computes single pair scores for one metric. Pixel rasters are decoded on
/// first use and kept for the lifetime of the scorer (one query).
pub struct PairScorer<'a> {
    metric: &'a MetricSpec,
    store: &'a ManifestStore,
    real: &'a ImageSlot,
    real_raster: Option<Raster>,
}

impl<'a> PairScorer<'a> {
    fn score(&mut self, synth: &ImageSlot, variant_dir: &Path) -> Result<f64> {
        let m = self.metric;
        match m.kind {
            MetricKind::Psnr | MetricKind::Ssim => {
                if self.real_raster.is_none() {
                    self.real_raster = Some(Raster::load(&self.real.image_path()?, m.channels)?);
                }
                let a = self.real_raster.as_ref().expect("loaded");
                let b = Raster::load(&synth.image_path()?, m.channels)?;
                if m.kind == MetricKind::Psnr {
                    psnr(a, &b)
                } else {
                    ssim(a, &b)
                }
            }
            MetricKind::EmbeddingCosine => {
                let stem = m.manifest.as_deref().expect("validated");
                let ma = self.store.embedding(&self.real.dir.join(stem))?;
                let mb = self.store.embedding(&synth.dir.join(stem))?;
                let ea = lookup(ma.get(&self.real.image_id), &self.real.image_id, &self.real.dir.join(stem))?;
                let eb = lookup(mb.get(&synth.image_id), &synth.image_id, &synth.dir.join(stem))?;
                cosine_similarity_f32(ea, eb)
            }
            MetricKind::KeypointInliers => {
                let stem = m.manifest.as_deref().expect("validated");
                let ma = self.store.keypoints(&self.real.dir.join(stem))?;
                let mb = self.store.keypoints(&synth.dir.join(stem))?;
                let ka = lookup(ma.get(&self.real.image_id), &self.real.image_id, &self.real.dir.join(stem))?;
                let kb = lookup(mb.get(&synth.image_id), &synth.image_id, &synth.dir.join(stem))?;
                let matches = mutual_nn_matches(ka, kb)?;
                Ok(self.inliers(&matches, synth))
            }
            MetricKind::CorrespondenceInliers => {
                let dir = variant_dir.join(m.matches_dir.as_deref().expect("validated"));
                let path = dir.join(format!("{}__{}.csv", self.real.image_id, synth.image_id));
                let matches = CorrespondenceSet::load(&path)?;
                Ok(self.inliers(&matches, synth))
            }
        }
    }

    fn inliers(&self, matches: &CorrespondenceSet, synth: &ImageSlot) -> f64 {
        let params = RansacParams::with_seed(ransac_seed(&self.real.qualified_id, &synth.qualified_id));
        ransac_inlier_count(matches, &params).inlier_count as f64
    }
}

fn lookup<'v, T: ?Sized>(v: Option<&'v T>, image_id: &str, stem: &Path) -> Result<&'v T> {
    v.ok_or_else(|| {
        Error::Validation(format!(
            "image '{image_id}' has no entry in manifest {}",
            index_path(stem).display()
        ))
    })
}

/// Per-query best scores of one metric for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantMetricScores {
    pub collection: String,
    pub variant_id: String,
    pub metric_id: String,
    /// `(real image id, best score over its candidates)` in plan order.
    pub per_query: Vec<(String, f64)>,
}

impl VariantMetricScores {
    pub fn mean(&self) -> f64 {
        let v: Vec<f64> = self.per_query.iter().map(|q| q.1).collect();
        stable_mean(&v)
    }
}

/// Counters for the metric stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    pub pairs_requested: usize,
    pub cache_hits: usize,
}

pub struct Engine {
    config: BenchmarkConfig,
    cache: PairScoreCache,
    pool: rayon::ThreadPool,
    store: ManifestStore,
    counters: Mutex<StageCounters>,
}

impl Engine {
    /// `workers = None` uses all available hardware threads.
    pub fn new(config: BenchmarkConfig, cache: PairScoreCache, workers: Option<usize>) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            if n == 0 {
                return Err(Error::InvalidParameter("worker count must be positive".into()));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::pipeline("pipeline", "thread pool", e))?;
        Ok(Engine {
            config,
            cache,
            pool,
            store: ManifestStore::default(),
            counters: Mutex::new(StageCounters::default()),
        })
    }

    pub fn config(&self) -> &BenchmarkConfig {
        &self.config
    }

    pub fn cache(&self) -> &PairScoreCache {
        &self.cache
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn counters(&self) -> StageCounters {
        *self.counters.lock().expect("counter lock")
    }

    /// Runs `f` inside the engine's worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn metric(&self, id: &str) -> Result<&MetricSpec> {
        self.config
            .metric(id)
            .ok_or_else(|| Error::Validation(format!("unknown metric '{id}'")))
    }

    /// Checks that every manifest `metric` needs exists, naming the first missing file.
    pub fn preflight(&self, metric_id: &str) -> Result<()> {
        let m = self.metric(metric_id)?;
        let Some(stem) = &m.manifest else {
            return Ok(());
        };
        if !matches!(m.kind, MetricKind::EmbeddingCosine | MetricKind::KeypointInliers) {
            return Ok(());
        }
        for c in &self.config.collections {
            let dirs = std::iter::once(&c.real_dir).chain(c.variants.iter().map(|v| &v.dir));
            for dir in dirs {
                for path in [index_path(&dir.join(stem)), blob_path(&dir.join(stem))] {
                    if !path.is_file() {
                        return Err(Error::Validation(format!(
                            "metric '{metric_id}' needs manifest file {} which does not exist",
                            path.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn plans(&self, collection: &Collection, k_override: Option<usize>) -> Result<Vec<PairingPlan>> {
        collection
            .variants
            .iter()
            .map(|v| build_collection_plan(collection, &v.id, k_override))
            .collect()
    }

    /// Loads the manifests `metric_id` needs for the given image directories.
    pub fn load_metric_resources(&self, metric_id: &str, dirs: &[&Path]) -> Result<()> {
        let m = self.metric(metric_id)?;
        let Some(stem) = &m.manifest else {
            return Ok(());
        };
        for dir in dirs {
            match m.kind {
                MetricKind::EmbeddingCosine => {
                    self.store.embedding(&dir.join(stem))?;
                }
                MetricKind::KeypointInliers => {
                    self.store.keypoints(&dir.join(stem))?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// One pair score computed from scratch, bypassing the cache.
    pub fn score_pair(&self, metric_id: &str, real: &ImageSlot, synth: &ImageSlot, variant_dir: &Path) -> Result<f64> {
        let metric = self.metric(metric_id)?;
        let mut scorer = PairScorer {
            metric,
            store: &self.store,
            real,
            real_raster: None,
        };
        scorer.score(synth, variant_dir)
    }

    /// The first `n` (real, synthetic) pairs of the pairing plans, in config
    /// order, with their variant directories.
    pub fn plan_pairs(&self, n: usize) -> Result<Vec<(ImageSlot, ImageSlot, PathBuf)>> {
        let mut out = Vec::with_capacity(n);
        for c in &self.config.collections {
            for plan in self.plans(c, None)? {
                let variant = c.variant(&plan.variant_id).expect("plan built from variant");
                for q in &plan.queries {
                    for cand in &q.candidates {
                        if out.len() == n {
                            return Ok(out);
                        }
                        out.push((
                            ImageSlot {
                                dir: c.real_dir.clone(),
                                image_id: q.real_id.clone(),
                                qualified_id: format!("{}/real/{}", c.name, q.real_id),
                            },
                            ImageSlot {
                                dir: variant.dir.clone(),
                                image_id: cand.clone(),
                                qualified_id: format!("{}/{}/{cand}", c.name, plan.variant_id),
                            },
                            variant.dir.clone(),
                        ));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Best score per query for every variant, for one metric.
    pub fn score_metric(&self, metric_id: &str, k_override: Option<usize>) -> Result<Vec<VariantMetricScores>> {
        self.preflight(metric_id)?;
        let metric = self.metric(metric_id)?;
        let mut out = Vec::new();
        for c in &self.config.collections {
            for plan in self.plans(c, k_override)? {
                let variant = c.variant(&plan.variant_id).expect("plan built from variant");
                let per_query = self.install(|| self.score_plan(c, &variant.dir, metric, &plan))?;
                debug!("{}/{} [{metric_id}]: {} queries", c.name, plan.variant_id, per_query.len());
                out.push(VariantMetricScores {
                    collection: c.name.clone(),
                    variant_id: plan.variant_id.clone(),
                    metric_id: metric_id.to_string(),
                    per_query,
                });
            }
        }
        Ok(out)
    }

    fn score_plan(
        &self,
        c: &Collection,
        variant_dir: &Path,
        metric: &MetricSpec,
        plan: &PairingPlan,
    ) -> Result<Vec<(String, f64)>> {
        let real_prefix = format!("{}/real", c.name);
        let synth_prefix = format!("{}/{}", c.name, plan.variant_id);
        let results: Vec<Result<(String, f64)>> = plan
            .queries
            .par_iter()
            .map(|q| {
                let real = ImageSlot {
                    dir: c.real_dir.clone(),
                    image_id: q.real_id.clone(),
                    qualified_id: format!("{real_prefix}/{}", q.real_id),
                };
                let mut scorer = PairScorer {
                    metric,
                    store: &self.store,
                    real: &real,
                    real_raster: None,
                };
                let mut best: Option<f64> = None;
                let mut hits = 0;
                let mut failures = Vec::new();
                for cand in &q.candidates {
                    let synth = ImageSlot {
                        dir: variant_dir.to_path_buf(),
                        image_id: cand.clone(),
                        qualified_id: format!("{synth_prefix}/{cand}"),
                    };
                    let value = match self.cache.get(&real.qualified_id, &synth.qualified_id, &metric.id) {
                        Some(s) => {
                            hits += 1;
                            Ok(s.value)
                        }
                        None => scorer.score(&synth, variant_dir).and_then(|v| {
                            self.cache.put(&real.qualified_id, &synth.qualified_id, &metric.id, v)?;
                            Ok(v)
                        }),
                    };
                    match value {
                        // first candidate wins ties
                        Ok(v) => {
                            if best.is_none_or(|b| v > b) {
                                best = Some(v);
                            }
                        }
                        Err(e) => failures.push(format!("{} x {}: {e}", real.qualified_id, synth.qualified_id)),
                    }
                }
                {
                    let mut ctr = self.counters.lock().expect("counter lock");
                    ctr.pairs_requested += q.candidates.len();
                    ctr.cache_hits += hits;
                }
                for f in &failures {
                    log::warn!("[metrics:{}] {f}", metric.id);
                }
                match best {
                    Some(b) => Ok((q.real_id.clone(), b)),
                    None => Err(Error::pipeline(
                        "metrics",
                        format!("{} [{}]", real.qualified_id, metric.id),
                        format!("every candidate failed: {}", failures.join("; ")),
                    )),
                }
            })
            .collect();
        results.into_iter().collect()
    }

    /// Dataset-level records for an (appearance, geometry) metric pair.
    pub fn score(&self, appearance: &str, geometry: &str, k_override: Option<usize>) -> Result<Vec<VariantRecord>> {
        let app = self.score_metric(appearance, k_override)?;
        let geo = self.score_metric(geometry, k_override)?;
        let transform = geometry_transform(self.metric(geometry)?.kind);
        let scores = self.config.downstream_scores();
        let records = app
            .iter()
            .zip(&geo)
            .map(|(a, g)| {
                let qs: Vec<QueryScore> = a
                    .per_query
                    .iter()
                    .zip(&g.per_query)
                    .map(|((rid, av), (_, gv))| QueryScore {
                        real_id: rid.clone(),
                        appearance: *av,
                        geometry: *gv,
                    })
                    .collect();
                aggregate_variant(&a.variant_id, &a.collection, &qs, transform, scores.get(&a.variant_id).copied())
                    .map_err(|e| Error::pipeline("aggregate", a.variant_id.clone(), e))
            })
            .collect::<Result<Vec<_>>>()?;
        info!(
            "scored {} variants with {appearance} x {geometry} ({} workers)",
            records.len(),
            self.workers()
        );
        Ok(records)
    }

    /// Dataset-level value of one metric per variant, in config order: the mean
    /// of per-query best scores, log-stabilized for count metrics.
    pub fn single_metric_values(&self, metric_id: &str, k_override: Option<usize>) -> Result<Vec<(String, f64)>> {
        let kind = self.metric(metric_id)?.kind;
        Ok(self
            .score_metric(metric_id, k_override)?
            .into_iter()
            .map(|s| {
                let m = s.mean();
                let v = match geometry_transform(kind) {
                    GeometryTransform::Log1p => m.ln_1p(),
                    GeometryTransform::Identity => m,
                };
                (s.variant_id, v)
            })
            .collect())
    }
}
