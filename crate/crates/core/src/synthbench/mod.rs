//! Procedural benchmark generator with a planted downstream utility.
//!
//! Each family is one "real" dataset: captures of a few base layouts from
//! random viewpoints. Each synthetic variant re-renders those captures with
//! an appearance corruption level and a geometry corruption level, and gets a
//! downstream score from a known function of the two levels.

pub mod features;
pub mod render;
pub mod scene;

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::manifest::{write_embedding_manifest, write_keypoint_manifest};
use crate::datamodel::table::write_pair_map;
use crate::datamodel::{
    ChannelMode, CollectionSpec, ConfigDocument, FusionSettings, Keypoint, MetricKind, MetricSpec,
    NormalizationScope, PairingMode, VariantSpec,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

use features::{keypoints, raw_embedding, DESCRIPTOR_DIM};
use render::{degrade_appearance, quantize, rasterize, RgbImage};
use scene::{base_layout, degrade_geometry, Viewpoint};

pub const CONFIG_FILE: &str = "benchmark.toml";
pub const PLANTED_FILE: &str = "planted.json";
pub const EMBEDDING_STEM: &str = "emb";
pub const KEYPOINT_STEM: &str = "kp";
pub const PAIR_MAP_FILE: &str = "pairs.csv";

/// Everything needed to render one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Base arrangement of objects.
    pub layout_seed: u64,
    /// Viewpoint and per-capture texture noise.
    pub capture_seed: u64,
    /// Random draws of both corruptions.
    pub degradation_seed: u64,
    pub canvas: (u32, u32),
    pub n_objects: usize,
    pub appearance_level: f64,
    pub geometry_level: f64,
}

pub struct RenderedScene {
    pub image: RgbImage,
    pub keypoints: Vec<Keypoint>,
    pub raw_embedding: Vec<f64>,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("appearance_level", self.appearance_level), ("geometry_level", self.geometry_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.canvas.0 < 32 || self.canvas.1 < 32 {
            return Err(Error::InvalidParameter(format!(
                "canvas {}x{} is smaller than 32x32",
                self.canvas.0, self.canvas.1
            )));
        }
        if self.n_objects == 0 {
            return Err(Error::InvalidParameter("a scene needs at least one object".into()));
        }
        Ok(())
    }

    /// Pure function of the `BenchmarkSpec`.
    pub fn render(&self) -> Result<RenderedScene> {
        self.validate()?;
        let (w, h) = self.canvas;
        let base = base_layout(self.layout_seed, w, h, self.n_objects);
        let placed = Viewpoint::sample(self.capture_seed).apply(&base);
        let layout = degrade_geometry(&placed, self.geometry_level, self.degradation_seed);
        let mut pixels = rasterize(&layout, self.capture_seed);
        degrade_appearance(&mut pixels, self.appearance_level, self.degradation_seed);
        let image = quantize(w, h, &pixels);
        let keypoints = keypoints(
            &layout,
            &image,
            self.layout_seed,
            self.capture_seed,
            self.geometry_level,
            self.degradation_seed,
        );
        let raw_embedding = raw_embedding(&image);
        Ok(RenderedScene {
            image,
            keypoints,
            raw_embedding,
        })
    }
}

/// `y = base − w_app·A − w_geo·G − w_int·A·G + noise` for corruption levels A, G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedUtility {
    pub base: f64,
    pub w_app: f64,
    pub w_geo: f64,
    pub w_int: f64,
    pub noise_sigma: f64,
}

impl PlantedUtility {
    /// Utility that needs both fidelities at once: close to
    /// `0.9·(1 − 0.89·A)·(1 − 0.89·G)`. The negative `w_int` gives back part of
    /// the penalty when both levels are high, so neither level alone explains
    /// the score.
    pub fn interaction() -> Self {
        PlantedUtility {
            base: 0.9,
            w_app: 0.8,
            w_geo: 0.8,
            w_int: -0.7,
            noise_sigma: 0.005,
        }
    }

    pub fn expected(&self, appearance_level: f64, geometry_level: f64) -> f64 {
        self.base
            - self.w_app * appearance_level
            - self.w_geo * geometry_level
            - self.w_int * appearance_level * geometry_level
    }

    /// True when the expected utility cannot increase with either level on [0, 1]².
    pub fn is_monotone(&self) -> bool {
        self.w_app + self.w_int.min(0.0) >= 0.0 && self.w_geo + self.w_int.min(0.0) >= 0.0
    }

    /// Expected utility plus approximately normal noise (Irwin–Hall, 12 draws).
    pub fn sample(&self, appearance_level: f64, geometry_level: f64, seed: u64) -> f64 {
        let mut rng = rng_for(seed, "utility");
        let z: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
        self.expected(appearance_level, geometry_level) + self.noise_sigma * z
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub n_layouts: usize,
    pub n_real: usize,
    /// `[appearance_level, geometry_level]` per variant.
    pub levels: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub canvas: (u32, u32),
    pub n_objects: usize,
    pub families: Vec<FamilySpec>,
    pub utility: PlantedUtility,
    pub pairing: PairingMode,
    pub pool_size_k: usize,
    pub n_starts: usize,
}

impl BenchmarkSpec {
    /// Five families of three variants. Within each family the appearance and
    /// geometry levels are both permutations of {0, ½, 1}, paired differently
    /// per family.
    pub fn standard(seed: u64) -> Self {
        let level_sets: [[[f64; 2]; 3]; 5] = [
            [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]],
            [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]],
            [[0.0, 0.5], [0.5, 1.0], [1.0, 0.0]],
            [[0.0, 1.0], [0.5, 0.0], [1.0, 0.5]],
            [[0.0, 0.5], [0.5, 0.0], [1.0, 1.0]],
        ];
        let names = ["atrium", "bench", "cellar", "dock", "easel"];
        BenchmarkSpec {
            seed,
            canvas: (128, 128),
            n_objects: 8,
            families: names
                .iter()
                .zip(level_sets)
                .map(|(name, levels)| FamilySpec {
                    name: name.to_string(),
                    n_layouts: 4,
                    n_real: 24,
                    levels: levels.to_vec(),
                })
                .collect(),
            utility: PlantedUtility::interaction(),
            pairing: PairingMode::Retrieval,
            pool_size_k: 10,
            n_starts: 300,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParameter("benchmark needs at least one family".into()));
        }
        for f in &self.families {
            if f.n_layouts == 0 || f.n_real == 0 || f.levels.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "family '{}' needs layouts, real images and variants",
                    f.name
                )));
            }
            for l in &f.levels {
                if !(0.0..=1.0).contains(&l[0]) || !(0.0..=1.0).contains(&l[1]) {
                    return Err(Error::InvalidParameter(format!(
                        "family '{}': levels {l:?} outside [0, 1]",
                        f.name
                    )));
                }
            }
        }
        if !self.utility.is_monotone() {
            log::warn!("planted utility is not monotone in the corruption levels");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVariant {
    pub collection: String,
    pub variant_id: String,
    pub appearance_level: f64,
    pub geometry_level: f64,
    pub downstream_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedBenchmark {
    pub root: PathBuf,
    pub config_path: PathBuf,
    pub spec: BenchmarkSpec,
    pub variants: Vec<PlantedVariant>,
}

pub fn variant_id(family: &str, index: usize) -> String {
    format!("{family}_v{index}")
}

pub fn real_image_id(index: usize) -> String {
    format!("r{index:03}")
}

pub fn synth_image_id(index: usize) -> String {
    format!("s{index:03}")
}

fn family_seed(seed: u64, family: &str) -> u64 {
    derive_seed(seed, &format!("synth/family/{family}"))
}

/// Scene specs for the real captures of one family.
pub fn real_specs(spec: &BenchmarkSpec, family: &FamilySpec) -> Vec<SceneSpec> {
    let fs = family_seed(spec.seed, &family.name);
    (0..family.n_real)
        .map(|i| SceneSpec {
            layout_seed: derive_seed(fs, &format!("layout/{}", i % family.n_layouts)),
            capture_seed: derive_seed(fs, &format!("capture/{i}")),
            degradation_seed: derive_seed(fs, &format!("degrade/real/{i}")),
            canvas: spec.canvas,
            n_objects: spec.n_objects,
            appearance_level: 0.0,
            geometry_level: 0.0,
        })
        .collect()
}

/// Scene specs for variant `v` of a family: synthetic image `j` re-renders real
/// capture `j` at the variant's corruption levels.
pub fn variant_specs(spec: &BenchmarkSpec, family: &FamilySpec, v: usize) -> Vec<SceneSpec> {
    let fs = family_seed(spec.seed, &family.name);
    let [la, lg] = family.levels[v];
    real_specs(spec, family)
        .into_iter()
        .enumerate()
        .map(|(j, s)| SceneSpec {
            degradation_seed: derive_seed(fs, &format!("degrade/{v}/{j}")),
            appearance_level: la,
            geometry_level: lg,
            ..s
        })
        .collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

struct ImageSet {
    dir: PathBuf,
    ids: Vec<String>,
    scenes: Vec<RenderedScene>,
}

/// Renders and writes one family: real set, variant sets, aligned pair maps,
/// and keypoint / embedding manifests. Embeddings are centred on the mean of
/// the family's real set.
pub fn generate_collection(
    spec: &BenchmarkSpec,
    family: &FamilySpec,
    root: &Path,
) -> Result<(CollectionSpec, Vec<PlantedVariant>)> {
    let family_dir = root.join(&family.name);
    let render_all = |specs: Vec<SceneSpec>| -> Result<Vec<RenderedScene>> {
        specs.par_iter().map(SceneSpec::render).collect()
    };
    let mut sets = vec![ImageSet {
        dir: family_dir.join("real"),
        ids: (0..family.n_real).map(real_image_id).collect(),
        scenes: render_all(real_specs(spec, family))?,
    }];
    for v in 0..family.levels.len() {
        sets.push(ImageSet {
            dir: family_dir.join(variant_id(&family.name, v)),
            ids: (0..family.n_real).map(synth_image_id).collect(),
            scenes: render_all(variant_specs(spec, family, v))?,
        });
    }

    let dim = sets[0].scenes[0].raw_embedding.len();
    let mut center = vec![0.0; dim];
    for s in &sets[0].scenes {
        for (c, v) in center.iter_mut().zip(&s.raw_embedding) {
            *c += v / family.n_real as f64;
        }
    }
    let header = serde_json::json!({
        "encoder": "synthbench-photometric-stats",
        "centering": "family real-set mean",
        "descriptor": "layout signature + patch statistics",
    });

    for set in &sets {
        create_dir(&set.dir)?;
        set.scenes
            .par_iter()
            .zip(&set.ids)
            .try_for_each(|(scene, id)| scene.image.save_png(&set.dir.join(format!("{id}.png"))))?;
        let emb: Vec<(String, Vec<f32>)> = set
            .ids
            .iter()
            .zip(&set.scenes)
            .map(|(id, s)| {
                let v = s.raw_embedding.iter().zip(&center).map(|(x, c)| (x - c) as f32).collect();
                (id.clone(), v)
            })
            .collect();
        write_embedding_manifest(&set.dir.join(EMBEDDING_STEM), Some(&header), &emb)?;
        let kps: Vec<(String, Vec<Keypoint>)> = set
            .ids
            .iter()
            .zip(&set.scenes)
            .map(|(id, s)| (id.clone(), s.keypoints.clone()))
            .collect();
        write_keypoint_manifest(&set.dir.join(KEYPOINT_STEM), Some(&header), DESCRIPTOR_DIM, &kps)?;
    }

    let fs = family_seed(spec.seed, &family.name);
    let mut variants = Vec::new();
    let mut planted = Vec::new();
    for (v, set) in sets.iter().enumerate().skip(1) {
        let v = v - 1;
        let pairs: Vec<(String, String)> = sets[0].ids.iter().cloned().zip(set.ids.iter().cloned()).collect();
        write_pair_map(&set.dir.join(PAIR_MAP_FILE), &pairs)?;
        let [la, lg] = family.levels[v];
        let id = variant_id(&family.name, v);
        let y = spec
            .utility
            .sample(la, lg, derive_seed(fs, &format!("utility/{v}")));
        variants.push(VariantSpec {
            id: id.clone(),
            dir: PathBuf::from(&id),
            downstream_score: Some(y),
            pair_map: Some(PathBuf::from(&id).join(PAIR_MAP_FILE)),
        });
        planted.push(PlantedVariant {
            collection: family.name.clone(),
            variant_id: id,
            appearance_level: la,
            geometry_level: lg,
            downstream_score: y,
        });
    }
    let collection = CollectionSpec {
        name: family.name.clone(),
        root: PathBuf::from(&family.name),
        real: PathBuf::from("real"),
        pairing: spec.pairing,
        pool_size_k: spec.pool_size_k,
        max_queries: 1000,
        rng_seed: None,
        variants,
    };
    Ok((collection, planted))
}

/// Metrics available on every generated benchmark.
pub fn standard_metrics() -> Vec<MetricSpec> {
    let metric = |id: &str, kind, manifest: Option<&str>| MetricSpec {
        id: id.to_string(),
        kind,
        manifest: manifest.map(str::to_string),
        matches_dir: None,
        channels: ChannelMode::Luma,
    };
    vec![
        metric("emb", MetricKind::EmbeddingCosine, Some(EMBEDDING_STEM)),
        metric("psnr", MetricKind::Psnr, None),
        metric("ssim", MetricKind::Ssim, None),
        metric("kp", MetricKind::KeypointInliers, Some(KEYPOINT_STEM)),
    ]
}

/// Writes the full benchmark under `root` with its config and planted levels.
pub fn generate_benchmark(spec: &BenchmarkSpec, root: &Path) -> Result<GeneratedBenchmark> {
    spec.validate()?;
    create_dir(root)?;
    let mut collections = Vec::new();
    let mut variants = Vec::new();
    for family in &spec.families {
        let (c, v) = generate_collection(spec, family, root)?;
        collections.push(c);
        variants.extend(v);
    }
    let doc = ConfigDocument {
        seed: spec.seed,
        metrics: standard_metrics(),
        fusion: Some(FusionSettings {
            appearance: "emb".into(),
            geometry: "kp".into(),
            normalization: NormalizationScope::PerCollection,
            n_starts: spec.n_starts,
        }),
        collections,
    };
    let config_path = root.join(CONFIG_FILE);
    std::fs::write(&config_path, doc.to_toml_string()).map_err(|e| Error::io(&config_path, e))?;
    let generated = GeneratedBenchmark {
        root: root.to_path_buf(),
        config_path,
        spec: spec.clone(),
        variants,
    };
    // paths stay out of the file so regenerating elsewhere gives identical bytes
    write_json(
        &root.join(PLANTED_FILE),
        &serde_json::json!({ "spec": generated.spec, "variants": generated.variants }),
    )?;
    Ok(generated)
}


#[cfg(test)]
mod measured_axes {
    use super::*;
    use crate::calibrate::spearman;
    use crate::datamodel::{BenchmarkConfig, PairScoreCache, VariantRecord, ENGINE_VERSION};
    use crate::pipeline::Engine;

    const LEVELS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

    fn sweep_records(seed: u64) -> (Vec<VariantRecord>, Vec<VariantRecord>) {
        let mut spec = BenchmarkSpec::standard(seed);
        spec.pairing = PairingMode::Aligned;
        spec.families = vec![
            FamilySpec {
                name: "app".into(),
                n_layouts: 3,
                n_real: 9,
                levels: LEVELS.iter().map(|&l| [l, 0.5]).collect(),
            },
            FamilySpec {
                name: "geo".into(),
                n_layouts: 3,
                n_real: 9,
                levels: LEVELS.iter().map(|&l| [0.5, l]).collect(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let g = generate_benchmark(&spec, dir.path()).unwrap();
        let cfg = BenchmarkConfig::load(&g.config_path).unwrap();
        let engine = Engine::new(cfg, PairScoreCache::in_memory(ENGINE_VERSION), None).unwrap();
        let records = engine.score("emb", "kp", None).unwrap();
        let (app, geo): (Vec<_>, Vec<_>) = records.into_iter().partition(|r| r.collection == "app");
        (app, geo)
    }

    #[test]
    fn measured_axes_are_monotone_and_separable() {
        let (app, geo) = sweep_records(21);
        let levels = LEVELS.to_vec();

        let a: Vec<f64> = app.iter().map(|r| r.mean_appearance).collect();
        let (rho_a, _) = spearman(&levels, &a).unwrap();
        assert!(rho_a <= -0.9, "appearance vs level: rho {rho_a}, values {a:?}");

        let g: Vec<f64> = geo.iter().map(|r| r.mean_geometry_log).collect();
        let (rho_g, _) = spearman(&levels, &g).unwrap();
        assert!(rho_g <= -0.9, "geometry vs level: rho {rho_g}, values {g:?}");

        // appearance corruption leaves the geometry signal alone
        let ga: Vec<f64> = app.iter().map(|r| r.mean_geometry_log).collect();
        let lo = ga.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ga.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((hi - lo) / hi < 0.10, "geometry drifts under appearance sweep: {ga:?}");
    }
}
