//! Run summaries and their plot-ready CSV exports.
//!
//! A run summary collects the outputs of the analysis commands for one
//! (config, seed) pair. It is serialized with sorted keys and no timestamps, so
//! its SHA-256 identifies the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::aggregate::stable_mean;
use crate::calibrate::{
    component_sweep, correlation_report, k_sensitivity_sweep, leave_one_out, pearson_or_undefined,
    sensitivity_grid, spearman, Calibration, CoefPair, ComponentSweep, FitSettings, KSweepEntry, LodoOptions,
    LodoSplit, SensitivityGrid,
};
use crate::datamodel::{
    MetricKind, NormalizationScope, NormalizationStats, VariantRecord, ENGINE_VERSION,
};
use crate::error::{Error, Result};
use crate::fusion::{FusionEquation, FusionModel};
use crate::pipeline::Engine;
use crate::seed::sha256_hex;

pub const SUMMARY_FILE: &str = "run_summary.json";
pub const VARIANT_TABLE_FILE: &str = "variants.csv";
pub const BARS_FILE: &str = "bars.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const KSWEEP_FILE: &str = "ksweep.csv";
pub const LODO_FILE: &str = "lodo.csv";

/// Label of the fused score in tables that list it next to single metrics.
pub const FUSED_LABEL: &str = "SADGE";

/// Which axis a single metric measures when used as a baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Fused,
    Appearance,
    Geometry,
}

impl MetricFamily {
    /// SSIM counts as a structural metric; pixel error and embedding
    /// similarity count as appearance.
    pub fn of(kind: MetricKind) -> MetricFamily {
        match kind {
            MetricKind::EmbeddingCosine | MetricKind::Psnr => MetricFamily::Appearance,
            MetricKind::Ssim | MetricKind::KeypointInliers | MetricKind::CorrespondenceInliers => {
                MetricFamily::Geometry
            }
        }
    }

    fn label(self) -> &'static str {
        match self {
            MetricFamily::Fused => "fused",
            MetricFamily::Appearance => "appearance",
            MetricFamily::Geometry => "geometry",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub engine_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub appearance_metric: String,
    pub geometry_metric: String,
    pub normalization: NormalizationScope,
    pub equation: FusionEquation,
    pub n_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarEntry {
    pub method: String,
    pub family: MetricFamily,
    pub pearson_r: Option<f64>,
    pub spearman_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub variant_id: String,
    pub collection: String,
    pub g_hat: f64,
    pub a_hat: f64,
    pub fused: f64,
    pub downstream_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSection {
    pub stats: BTreeMap<String, NormalizationStats>,
    pub model: FusionModel,
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub spearman_p_approx: Option<f64>,
    pub n: usize,
    pub best_start_seed: u64,
    pub scatter: Vec<ScatterRow>,
    pub bars: Vec<BarEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoRow {
    pub excluded: String,
    pub fused_r: f64,
    pub params: Vec<f64>,
    pub baselines: BTreeMap<String, Option<f64>>,
    pub fused_ranked_first: bool,
}

impl From<&LodoSplit> for LodoRow {
    fn from(s: &LodoSplit) -> Self {
        LodoRow {
            excluded: s.excluded.clone(),
            fused_r: s.calibration.report.pearson_r,
            params: s.calibration.fit.model.params.clone(),
            baselines: s.baselines.clone(),
            fused_ranked_first: s.fused_ranked_first,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub header: RunHeader,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<VariantRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grids: Option<Vec<SensitivityGrid>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ksweep: Option<Vec<KSweepEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lodo: Option<Vec<LodoRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component_sweep: Option<ComponentSweep>,
}

impl RunSummary {
    pub fn new(header: RunHeader) -> Self {
        RunSummary {
            header,
            variants: None,
            fit: None,
            grids: None,
            ksweep: None,
            lodo: None,
            component_sweep: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Loads the summary in `dir` when it belongs to the same run, otherwise
    /// starts a new one.
    pub fn resume(dir: &Path, header: RunHeader) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        if path.is_file() {
            match Self::load(&path) {
                Ok(s) if s.header == header => return Ok(s),
                Ok(_) => info!("existing {} is from a different run; starting fresh", path.display()),
                Err(e) => warn!("ignoring unreadable {}: {e}", path.display()),
            }
        }
        Ok(Self::new(header))
    }

    /// Writes the summary into `dir` and returns (path, hash).
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, String)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(SUMMARY_FILE);
        let text = self.to_json();
        std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        Ok((path, sha256_hex(text.as_bytes())))
    }
}

/// Z-scores `values` within each collection (per-collection scope) or leaves
/// them as they are (pooled scope, where Pearson r is affine-invariant anyway).
pub fn scoped_values(values: &[f64], collections: &[String], scope: NormalizationScope) -> Vec<f64> {
    if scope == NormalizationScope::Pooled {
        return values.to_vec();
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in collections.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut out = vec![0.0; values.len()];
    for idx in groups.values() {
        let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let mu = stable_mean(&v);
        let var = stable_mean(&v.iter().map(|x| (x - mu).powi(2)).collect::<Vec<_>>());
        let sd = var.sqrt();
        for &i in idx {
            out[i] = if sd > 0.0 { (values[i] - mu) / sd } else { 0.0 };
        }
    }
    out
}

/// Analysis commands over one engine and fit configuration.
pub struct Analysis<'e> {
    pub engine: &'e Engine,
    pub appearance: String,
    pub geometry: String,
    pub settings: FitSettings,
}

impl<'e> Analysis<'e> {
    /// Uses the config's fusion section, falling back to the given metric ids.
    pub fn new(
        engine: &'e Engine,
        appearance: Option<String>,
        geometry: Option<String>,
        equation: FusionEquation,
        scope: Option<NormalizationScope>,
        n_starts: Option<usize>,
    ) -> Result<Self> {
        let cfg = engine.config();
        let fusion = cfg.fusion.as_ref();
        let pick = |given: Option<String>, from_cfg: Option<&String>, what: &str| {
            given.or_else(|| from_cfg.cloned()).ok_or_else(|| {
                Error::Validation(format!("no {what} metric given and the config has no [fusion] section"))
            })
        };
        let appearance = pick(appearance, fusion.map(|f| &f.appearance), "appearance")?;
        let geometry = pick(geometry, fusion.map(|f| &f.geometry), "geometry")?;
        engine.metric(&appearance)?;
        engine.metric(&geometry)?;
        let settings = FitSettings {
            scope: scope.or(fusion.map(|f| f.normalization)).unwrap_or_default(),
            equation,
            n_starts: n_starts.or(fusion.map(|f| f.n_starts)).unwrap_or(300),
            seed: cfg.seed,
        };
        Ok(Analysis {
            engine,
            appearance,
            geometry,
            settings,
        })
    }

    pub fn header(&self) -> RunHeader {
        RunHeader {
            engine_version: ENGINE_VERSION.to_string(),
            config_hash: self.engine.config().source_hash.clone(),
            seed: self.settings.seed,
            appearance_metric: self.appearance.clone(),
            geometry_metric: self.geometry.clone(),
            normalization: self.settings.scope,
            equation: self.settings.equation,
            n_starts: self.settings.n_starts,
        }
    }

    pub fn records(&self, k_override: Option<usize>) -> Result<Vec<VariantRecord>> {
        self.engine.score(&self.appearance, &self.geometry, k_override)
    }

    /// Scope-normalized dataset-level value of every configured metric, in
    /// record order.
    pub fn baselines(&self, records: &[VariantRecord]) -> Result<BTreeMap<String, Vec<f64>>> {
        let collections: Vec<String> = records.iter().map(|r| r.collection.clone()).collect();
        let mut out = BTreeMap::new();
        for m in &self.engine.config().metrics {
            let values = self.engine.single_metric_values(&m.id, None)?;
            let by_id: BTreeMap<&str, f64> = values.iter().map(|(id, v)| (id.as_str(), *v)).collect();
            let aligned: Vec<f64> = records
                .iter()
                .map(|r| {
                    by_id.get(r.variant_id.as_str()).copied().ok_or_else(|| {
                        Error::pipeline("report", r.variant_id.clone(), format!("no value for metric '{}'", m.id))
                    })
                })
                .collect::<Result<_>>()?;
            out.insert(m.id.clone(), scoped_values(&aligned, &collections, self.settings.scope));
        }
        Ok(out)
    }

    pub fn fit(&self, records: &[VariantRecord]) -> Result<(Calibration, FitSection)> {
        let cal = self.settings.calibrate(records)?;
        let mut scatter = Vec::with_capacity(cal.variants.len());
        for v in &cal.variants {
            scatter.push(ScatterRow {
                variant_id: v.variant_id.clone(),
                collection: v.collection.clone(),
                g_hat: v.g_hat,
                a_hat: v.a_hat,
                fused: cal.fit.model.predict(v.g_hat, v.a_hat)?,
                downstream_score: v.downstream_score.expect("calibrated variants have scores"),
            });
        }
        let y: Vec<f64> = scatter.iter().map(|s| s.downstream_score).collect();
        let mut bars = vec![BarEntry {
            method: FUSED_LABEL.to_string(),
            family: MetricFamily::Fused,
            pearson_r: Some(cal.report.pearson_r),
            spearman_rho: Some(cal.report.spearman_rho),
        }];
        for (id, values) in self.baselines(records)? {
            let kind = self.engine.metric(&id)?.kind;
            bars.push(BarEntry {
                family: MetricFamily::of(kind),
                pearson_r: pearson_or_undefined(&values, &y),
                spearman_rho: spearman(&values, &y).ok().map(|s| s.0).filter(|r| r.is_finite()),
                method: id,
            });
        }
        let section = FitSection {
            stats: cal.stats.clone(),
            model: cal.fit.model.clone(),
            pearson_r: cal.report.pearson_r,
            spearman_rho: cal.report.spearman_rho,
            spearman_p_approx: cal.report.spearman_p_approx,
            n: cal.report.n,
            best_start_seed: cal.fit.best_start_seed,
            scatter,
            bars,
        };
        Ok((cal, section))
    }

    /// `rows × cols` correlation grid for every coefficient pair, the third
    /// coefficient held at its fitted value.
    pub fn grids(&self, cal: &Calibration, rows: usize, cols: usize) -> Result<Vec<SensitivityGrid>> {
        if !matches!(
            cal.fit.model.equation_id,
            FusionEquation::ConstrainedPolynomial | FusionEquation::InteractionPolynomial
        ) {
            return Err(Error::Validation(format!(
                "sensitivity grids need a bilinear fit, got '{}'",
                cal.fit.model.equation_id
            )));
        }
        let points = crate::calibrate::fit_points(&cal.variants)?;
        let p = &cal.fit.model.params;
        self.engine.install(|| {
            CoefPair::ALL
                .iter()
                .map(|&pair| sensitivity_grid(&points, pair, p[pair.indices().2], rows, cols))
                .collect()
        })
    }

    pub fn ksweep(&self, ks: &[usize]) -> Result<Vec<KSweepEntry>> {
        k_sensitivity_sweep(ks, &self.settings, |k| self.records(Some(k)))
    }

    pub fn lodo(&self, records: &[VariantRecord], reuse_full_stats: bool) -> Result<Vec<LodoRow>> {
        let baselines = self.baselines(records)?;
        let opts = LodoOptions {
            scope: self.settings.scope,
            equation: self.settings.equation,
            n_starts: self.settings.n_starts,
            seed: self.settings.seed,
            reuse_full_stats,
        };
        Ok(leave_one_out(records, &baselines, &opts)?.iter().map(LodoRow::from).collect())
    }

    pub fn component_sweep(&self, appearance: &[String], geometry: &[String]) -> ComponentSweep {
        component_sweep(appearance, geometry, &self.settings, |a, g| self.engine.score(a, g, None))
    }
}

/// Correlation of an already-fitted model on `records`; used to score a
/// released or saved model without refitting.
pub fn evaluate_model(
    model: &FusionModel,
    records: &[VariantRecord],
    stats: &BTreeMap<String, NormalizationStats>,
) -> Result<crate::calibrate::CorrelationReport> {
    let variants = crate::aggregate::normalize_records(records, stats)?;
    let points = crate::calibrate::fit_points(&variants)?;
    let pred: Vec<f64> = points.iter().map(|p| model.predict(p.g_hat, p.a_hat)).collect::<Result<_>>()?;
    let y: Vec<f64> = points.iter().map(|p| p.y).collect();
    correlation_report(&pred, &y)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    w.write_record(header).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// What `export` wrote and what it skipped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportOutcome {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

/// Writes the figure and table exports of `summary` into `dir`. Sections that
/// the summary lacks are skipped with a note.
pub fn export(summary: &RunSummary, dir: &Path) -> Result<ExportOutcome> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = ExportOutcome::default();
    fn skip(out: &mut ExportOutcome, what: &str, cmd: &str) {
        let note = format!("{what}: no data in run summary (run `{cmd}` first)");
        warn!("{note}");
        out.skipped.push(note);
    }

    match &summary.fit {
        Some(fit) => {
            let p = dir.join(BARS_FILE);
            write_csv(
                &p,
                &["method", "family", "pearson_r", "spearman_rho"],
                fit.bars
                    .iter()
                    .map(|b| vec![b.method.clone(), b.family.label().into(), opt(b.pearson_r), opt(b.spearman_rho)])
                    .collect(),
            )?;
            out.written.push(p);
            let p = dir.join(SCATTER_FILE);
            write_csv(
                &p,
                &["variant_id", "collection", "g_hat", "a_hat", "sadge", "downstream_score"],
                fit.scatter
                    .iter()
                    .map(|s| {
                        vec![
                            s.variant_id.clone(),
                            s.collection.clone(),
                            s.g_hat.to_string(),
                            s.a_hat.to_string(),
                            s.fused.to_string(),
                            s.downstream_score.to_string(),
                        ]
                    })
                    .collect(),
            )?;
            out.written.push(p);
        }
        None => {
            skip(&mut out, "bars", "fit");
            skip(&mut out, "scatter", "fit");
        }
    }

    match &summary.grids {
        Some(grids) => {
            let p = dir.join(HEATMAP_FILE);
            let mut rows = Vec::new();
            for g in grids {
                for (i, row) in g.r.iter().enumerate() {
                    for (j, r) in row.iter().enumerate() {
                        rows.push(vec![
                            g.pair.label().to_string(),
                            i.to_string(),
                            j.to_string(),
                            g.row_values[i].to_string(),
                            g.col_values[j].to_string(),
                            opt(*r),
                        ]);
                    }
                }
            }
            write_csv(&p, &["slice", "row", "col", "x", "y", "r"], rows)?;
            out.written.push(p);
        }
        None => skip(&mut out, "heatmap", "grid"),
    }

    match &summary.ksweep {
        Some(entries) => {
            let p = dir.join(KSWEEP_FILE);
            write_csv(
                &p,
                &["k", "pearson_r", "spearman_rho", "params"],
                entries
                    .iter()
                    .map(|e| {
                        let params: Vec<String> = e.params.iter().map(|v| v.to_string()).collect();
                        vec![e.k.to_string(), e.pearson_r.to_string(), e.spearman_rho.to_string(), params.join(";")]
                    })
                    .collect(),
            )?;
            out.written.push(p);
        }
        None => skip(&mut out, "ksweep", "ksweep"),
    }

    match &summary.lodo {
        Some(rows) => {
            let p = dir.join(LODO_FILE);
            let mut table = Vec::new();
            for r in rows {
                table.push(vec![r.excluded.clone(), FUSED_LABEL.to_string(), r.fused_r.to_string(), "1".into()]);
                for (m, v) in &r.baselines {
                    table.push(vec![r.excluded.clone(), m.clone(), opt(*v), "0".into()]);
                }
            }
            write_csv(&p, &["excluded", "method", "pearson_r", "is_fused"], table)?;
            out.written.push(p);
        }
        None => skip(&mut out, "lodo", "lodo"),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> RunHeader {
        RunHeader {
            engine_version: ENGINE_VERSION.into(),
            config_hash: "abc".into(),
            seed: 1,
            appearance_metric: "emb".into(),
            geometry_metric: "kp".into(),
            normalization: NormalizationScope::PerCollection,
            equation: FusionEquation::ConstrainedPolynomial,
            n_starts: 10,
        }
    }

    #[test]
    fn scoped_values_standardize_each_collection() {
        let v = [1.0, 2.0, 3.0, 10.0, 30.0];
        let c: Vec<String> = ["a", "a", "a", "b", "b"].iter().map(|s| s.to_string()).collect();
        let z = scoped_values(&v, &c, NormalizationScope::PerCollection);
        let s = (2.0f64 / 3.0).sqrt();
        let expect = [-1.0 / s, 0.0, 1.0 / s, -1.0, 1.0];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{z:?}");
        }
        assert_eq!(scoped_values(&v, &c, NormalizationScope::Pooled), v.to_vec());
    }

    #[test]
    fn summary_round_trips_and_hash_is_stable() {
        let mut s = RunSummary::new(header());
        s.ksweep = Some(vec![KSweepEntry {
            k: 3,
            pearson_r: 0.5,
            spearman_rho: 0.4,
            params: vec![0.1, 0.2, 0.3],
        }]);
        let back: RunSummary = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn resume_only_matching_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = RunSummary::new(header());
        s.ksweep = Some(vec![]);
        s.save(dir.path()).unwrap();
        assert_eq!(RunSummary::resume(dir.path(), header()).unwrap(), s);
        let other = RunHeader { seed: 2, ..header() };
        assert_eq!(RunSummary::resume(dir.path(), other.clone()).unwrap(), RunSummary::new(other));
    }

    #[test]
    fn export_skips_missing_sections() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = RunSummary::new(header());
        s.ksweep = Some(vec![KSweepEntry {
            k: 1,
            pearson_r: 0.1,
            spearman_rho: 0.2,
            params: vec![1.0, 2.0, 3.0],
        }]);
        let out = export(&s, dir.path()).unwrap();
        assert_eq!(out.written, vec![dir.path().join(KSWEEP_FILE)]);
        assert_eq!(out.skipped.len(), 4);
        let text = std::fs::read_to_string(dir.path().join(KSWEEP_FILE)).unwrap();
        assert_eq!(text, "k,pearson_r,spearman_rho,params\n1,0.1,0.2,1;2;3\n");
    }
}
