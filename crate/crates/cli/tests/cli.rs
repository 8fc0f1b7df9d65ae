use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sadge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sadge"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        text(&out.stdout),
        text(&out.stderr)
    );
    text(&out.stdout)
}

/// A small generated benchmark (8 images per set) in a fresh temp dir.
fn small_benchmark() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("bench");
    ok(&sadge(&["synth", "--seed", "3", "--images", "8", "-o", root.to_str().unwrap()]));
    let cfg = root.join("benchmark.toml");
    assert!(cfg.is_file());
    (dir, cfg)
}

fn metric_stage_seconds(stderr: &str) -> f64 {
    let line = stderr.lines().find(|l| l.contains("metric stage:")).expect("metric stage logged");
    let after = line.split("metric stage:").nth(1).unwrap().trim();
    after.split('s').next().unwrap().parse().unwrap()
}

fn hash_line(stdout: &str) -> String {
    stdout
        .lines()
        .find(|l| l.starts_with("run summary:"))
        .and_then(|l| l.split("sha256:").nth(1))
        .expect("summary hash printed")
        .to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn score_writes_one_row_per_variant_and_warm_cache_is_faster() {
    let (dir, cfg) = small_benchmark();
    let out = dir.path().join("out");
    let cache = dir.path().join("cache");
    let args = ["score", "-c", s(&cfg), "-o", s(&out), "--cache-dir", s(&cache)];

    let cold = sadge(&args);
    let cold_stdout = ok(&cold);
    let table = std::fs::read_to_string(out.join("variants.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 15);

    let warm = sadge(&args);
    let warm_stdout = ok(&warm);
    assert_eq!(std::fs::read_to_string(out.join("variants.csv")).unwrap(), table);
    assert_eq!(hash_line(&cold_stdout), hash_line(&warm_stdout));

    let t_cold = metric_stage_seconds(&text(&cold.stderr));
    let t_warm = metric_stage_seconds(&text(&warm.stderr));
    assert!(t_cold >= 5.0 * t_warm, "cold {t_cold}s vs warm {t_warm}s");
    assert!(text(&warm.stderr).contains("cache hits"));
}

#[test]
fn missing_manifest_is_named() {
    let (dir, cfg) = small_benchmark();
    let victim = cfg.parent().unwrap().join("atrium/real/emb.index");
    std::fs::remove_file(&victim).unwrap();
    let out = sadge(&["score", "-c", s(&cfg), "-o", s(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains(s(&victim)), "{err}");
}

#[test]
fn unreadable_image_is_a_runtime_error_with_pair_context() {
    let (dir, cfg) = small_benchmark();
    std::fs::write(cfg.parent().unwrap().join("atrium/real/r000.png"), b"not a png").unwrap();
    let out = sadge(&[
        "score",
        "-c",
        s(&cfg),
        "-o",
        s(&dir.path().join("out")),
        "--appearance",
        "psnr",
        "--geometry",
        "ssim",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("[metrics]") && err.contains("atrium/real/r000"), "{err}");
}

#[test]
fn report_emits_every_export() {
    let (dir, cfg) = small_benchmark();
    let out = dir.path().join("out");
    let base = ["-c", s(&cfg), "-o", s(&out), "--starts", "20"];
    let run = |cmd: &[&str]| {
        let mut args: Vec<&str> = cmd.to_vec();
        args.extend_from_slice(&base);
        ok(&sadge(&args))
    };
    run(&["fit"]);
    run(&["grid", "--size", "7"]);
    run(&["ksweep", "--ks", "1,3"]);
    run(&["lodo"]);
    let stdout = ok(&sadge(&["report", "-o", s(&out)]));
    assert!(!stdout.contains("skipped"), "{stdout}");

    let lines = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().count();
    assert_eq!(lines("bars.csv"), 1 + 5);
    assert_eq!(lines("scatter.csv"), 1 + 15);
    assert_eq!(lines("heatmap.csv"), 1 + 3 * 7 * 7);
    assert_eq!(lines("ksweep.csv"), 1 + 2);
    assert_eq!(lines("lodo.csv"), 1 + 5 * 5);
    assert!(out.join("model.json").is_file());
}

#[test]
fn report_notes_missing_sections() {
    let (dir, cfg) = small_benchmark();
    let out = dir.path().join("out");
    ok(&sadge(&["ksweep", "-c", s(&cfg), "-o", s(&out), "--ks", "2", "--starts", "5"]));
    let stdout = ok(&sadge(&["report", "-o", s(&out)]));
    assert!(out.join("ksweep.csv").is_file());
    assert!(!out.join("bars.csv").exists());
    assert_eq!(stdout.lines().filter(|l| l.starts_with("skipped")).count(), 4);
}

#[test]
fn summary_hash_is_independent_of_worker_count() {
    let (dir, cfg) = small_benchmark();
    let mut hashes = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("out{w}"));
        let stdout = ok(&sadge(&["fit", "-c", s(&cfg), "-o", s(&out), "--workers", w, "--starts", "30"]));
        hashes.push((hash_line(&stdout), std::fs::read(out.join("run_summary.json")).unwrap()));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn bench_reports_columns_and_handles_empty_metric_list() {
    let (dir, cfg) = small_benchmark();
    let out = dir.path().join("out");
    let stdout = ok(&sadge(&["bench", "-c", s(&cfg), "-o", s(&out), "--pairs", "120", "--metrics", "psnr,ssim"]));
    assert!(stdout.contains("Load (s)") && stdout.contains("Total (s)") && stdout.contains("Pairs/s"));
    let table = std::fs::read_to_string(out.join("runtime.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    let empty = dir.path().join("empty");
    ok(&sadge(&["bench", "-c", s(&cfg), "-o", s(&empty), "--metrics", ""]));
    assert_eq!(std::fs::read_to_string(empty.join("runtime.csv")).unwrap().lines().count(), 1);
}

#[test]
fn exit_codes() {
    assert_eq!(sadge(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(sadge(&["fit", "-c", "/nonexistent/benchmark.toml"]).status.code(), Some(1));
    assert_eq!(sadge(&["report", "-o", "/nonexistent/out"]).status.code(), Some(1));
    assert_eq!(sadge(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 1\n[[collection]]\nname = 3\n").unwrap();
    let out = sadge(&["score", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("line"), "{}", text(&out.stderr));
}
