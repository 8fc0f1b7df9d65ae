use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use sadge_core::datamodel::table::write_variant_table;
use sadge_core::datamodel::{BenchmarkConfig, PairScoreCache, ENGINE_VERSION};
use sadge_core::pipeline::Engine;
use sadge_core::report::{export, Analysis, MetricFamily, RunSummary, VARIANT_TABLE_FILE};
use sadge_core::runtime::{format_runtime_table, run_bench, write_runtime_table, RUNTIME_FILE};
use sadge_core::synthbench::{generate_benchmark, BenchmarkSpec};
use sadge_core::Error;

use crate::{parse_list, Cli, Command, FitArgs, GlobalArgs};

pub const MODEL_FILE: &str = "model.json";

/// 1 for bad input or configuration, 2 for anything that failed at run time.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(err) if err.is_validation() => 1,
        _ => 2,
    }
}

fn engine(g: &GlobalArgs) -> Result<Engine> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| Error::Validation("this command needs --config".into()))?;
    if !path.is_file() {
        return Err(Error::Validation(format!("config file {} does not exist", path.display())).into());
    }
    let mut cfg = BenchmarkConfig::load(path)?;
    if let Some(seed) = g.seed {
        cfg = cfg.with_seed(seed);
    }
    let cache = match &g.cache_dir {
        Some(dir) => PairScoreCache::open(dir, ENGINE_VERSION)?,
        None => PairScoreCache::in_memory(ENGINE_VERSION),
    };
    Ok(Engine::new(cfg, cache, g.workers)?)
}

fn analysis<'e>(engine: &'e Engine, f: &FitArgs) -> Result<Analysis<'e>> {
    Ok(Analysis::new(
        engine,
        f.appearance.clone(),
        f.geometry.clone(),
        f.equation,
        f.scope,
        f.starts,
    )?)
}

fn save(summary: &RunSummary, out: &Path) -> Result<()> {
    let (path, hash) = summary.save(out)?;
    println!("run summary: {} sha256:{hash}", path.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out_dir.as_path();
    match &cli.command {
        Command::Synth { images } => {
            let mut spec = BenchmarkSpec::standard(g.seed.unwrap_or(0));
            if let Some(n) = images {
                for f in &mut spec.families {
                    f.n_real = *n;
                }
            }
            let t = Instant::now();
            let generated = generate_benchmark(&spec, out)?;
            info!(
                "generated {} variants in {:.1}s",
                generated.variants.len(),
                t.elapsed().as_secs_f64()
            );
            println!("config: {}", generated.config_path.display());
            Ok(())
        }
        Command::Report => {
            let path = out.join(sadge_core::report::SUMMARY_FILE);
            if !path.is_file() {
                return Err(Error::Validation(format!(
                    "no run summary at {}; run an analysis command with the same --out-dir first",
                    path.display()
                ))
                .into());
            }
            let summary = RunSummary::load(&path)?;
            let outcome = export(&summary, out)?;
            for p in &outcome.written {
                println!("wrote {}", p.display());
            }
            for note in &outcome.skipped {
                println!("skipped {note}");
            }
            println!("run summary: {} sha256:{}", path.display(), summary.hash());
            Ok(())
        }
        Command::Bench { pairs, metrics, device } => {
            let engine = engine(g)?;
            let ids = match metrics {
                Some(list) => parse_list(list),
                None => engine.config().metrics.iter().map(|m| m.id.clone()).collect(),
            };
            let rows = run_bench(&engine, &ids, *pairs, device)?;
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let path = write_runtime_table(&out.join(RUNTIME_FILE), &rows)?;
            print!("{}", format_runtime_table(&rows));
            println!("runtime table: {}", path.display());
            Ok(())
        }
        Command::Score { fit, k } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let t = Instant::now();
            let records = a.records(*k)?;
            let c = engine.counters();
            info!(
                "metric stage: {:.3}s, {} pair lookups, {} cache hits",
                t.elapsed().as_secs_f64(),
                c.pairs_requested,
                c.cache_hits
            );
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let table = out.join(VARIANT_TABLE_FILE);
            write_variant_table(&table, &records)?;
            println!("variant table: {}", table.display());
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.variants = Some(records);
            save(&summary, out)
        }
        Command::Fit { fit } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let records = a.records(None)?;
            let (_, section) = a.fit(&records)?;
            info!(
                "fit {} params {:?}: r = {:.4}, rho = {:.4}",
                section.model.equation_id, section.model.params, section.pearson_r, section.spearman_rho
            );
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let model_path = out.join(MODEL_FILE);
            std::fs::write(&model_path, section.model.to_json())
                .with_context(|| format!("writing {}", model_path.display()))?;
            println!("model: {}", model_path.display());
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.variants = Some(records);
            summary.fit = Some(section);
            save(&summary, out)
        }
        Command::Lodo { fit, reuse_full_stats } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let records = a.records(None)?;
            let rows = a.lodo(&records, *reuse_full_stats)?;
            for r in &rows {
                info!(
                    "without {}: fused r = {:.4}, ranked first: {}",
                    r.excluded, r.fused_r, r.fused_ranked_first
                );
            }
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.variants = Some(records);
            summary.lodo = Some(rows);
            save(&summary, out)
        }
        Command::Grid { fit, size } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let records = a.records(None)?;
            let (cal, section) = a.fit(&records)?;
            let grids = a.grids(&cal, *size, *size)?;
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.variants = Some(records);
            summary.fit = Some(section);
            summary.grids = Some(grids);
            save(&summary, out)
        }
        Command::Ksweep { fit, ks } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let entries = a.ksweep(ks)?;
            for e in &entries {
                info!("k = {}: r = {:.4}, rho = {:.4}", e.k, e.pearson_r, e.spearman_rho);
            }
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.ksweep = Some(entries);
            save(&summary, out)
        }
        Command::Sweep {
            fit,
            appearance_metrics,
            geometry_metrics,
        } => {
            let engine = engine(g)?;
            let a = analysis(&engine, fit)?;
            let by_family = |fam: MetricFamily| -> Vec<String> {
                engine
                    .config()
                    .metrics
                    .iter()
                    .filter(|m| MetricFamily::of(m.kind) == fam)
                    .map(|m| m.id.clone())
                    .collect()
            };
            let app = appearance_metrics
                .as_deref()
                .map(parse_list)
                .unwrap_or_else(|| by_family(MetricFamily::Appearance));
            let geo = geometry_metrics
                .as_deref()
                .map(parse_list)
                .unwrap_or_else(|| by_family(MetricFamily::Geometry));
            let sweep = a.component_sweep(&app, &geo);
            if let Some((gi, ai)) = sweep.best {
                info!("best combination: {} x {}", sweep.geometry_metrics[gi], sweep.appearance_metrics[ai]);
            }
            let mut summary = RunSummary::resume(out, a.header())?;
            summary.component_sweep = Some(sweep);
            save(&summary, out)
        }
    }
}
