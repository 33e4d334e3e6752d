use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SAMPLING: [&str; 6] = ["--depths", "10", "--near", "2", "--far", "12"];

fn mpiforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpiforge"))
        .args(args)
        .env("MPIFORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mpiforge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--seed", seed, "--out", p(dir)]);
}

fn build(dir: &Path, steps: &str) -> std::path::PathBuf {
    let mpi = dir.join("scene.cmpi");
    let rig = dir.join("rig.json");
    let mut args = vec!["build", "--rig", p(&rig), "--out", p(&mpi), "--steps", steps];
    args.extend(SAMPLING);
    ok(&args);
    mpi
}

#[test]
fn synth_build_render_and_measure() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "3");
    for name in [
        "view_0.png",
        "view_3.png",
        "rig.json",
        "heldout.png",
        "heldout.json",
        "views.json",
        "reference.json",
    ] {
        assert!(dir.path().join(name).exists(), "synth did not write {name}");
    }
    let mpi = build(dir.path(), "2");
    let rendered = dir.path().join("render.png");
    ok(&[
        "render",
        "--mpi",
        p(&mpi),
        "--pose",
        p(&dir.path().join("heldout.json")),
        "--out",
        p(&rendered),
    ]);

    let report = json(&ok(&["metrics", p(&rendered), p(&dir.path().join("heldout.png"))]));
    let ssim = report["ssim"].as_f64().unwrap();
    assert!(ssim > 0.8 && ssim <= 1.0, "held-out SSIM {ssim}");
    assert!(report["l1"].as_f64().unwrap() >= 0.0);
    assert!(report["psnr"].as_f64().unwrap().is_finite());

    // identical images: SSIM 1, L1 0, PSNR unbounded
    let same = json(&ok(&["metrics", p(&rendered), p(&rendered)]));
    assert_eq!(same["ssim"].as_f64(), Some(1.0));
    assert_eq!(same["l1"].as_f64(), Some(0.0));
    assert!(same["psnr"].is_null());
}

#[test]
fn sweep_writes_monotone_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let mpi = build(dir.path(), "1");
    let csv = ok(&["sweep", "--mpi", p(&mpi), "--views", p(&dir.path().join("views.json"))]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("threshold,occupancy,ssim,l1"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[19][0], 0.95);
    assert!(rows.windows(2).all(|r| r[1][1] <= r[0][1] && r[1][0] > r[0][0]));
    assert!(csv
        .lines()
        .skip(1)
        .all(|l| l.split(',').all(|v| v.split('.').nth(1).map(str::len) == Some(6))));

    let out = dir.path().join("sweep.csv");
    ok(&[
        "sweep",
        "--mpi",
        p(&mpi),
        "--views",
        p(&dir.path().join("views.json")),
        "--thresholds",
        "0,0.5",
        "--out",
        p(&out),
    ]);
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 3);
}

#[test]
fn bundle_round_trip_through_convert() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let rig = dir.path().join("rig.json");
    let mpi = dir.path().join("four.cmpi");
    ok(&[
        "build",
        "--rig",
        p(&rig),
        "--out",
        p(&mpi),
        "--depths",
        "4",
        "--near",
        "2",
        "--far",
        "12",
        "--steps",
        "1",
    ]);
    let bundle = dir.path().join("bundle");
    ok(&["convert", "--input", p(&mpi), "--output", p(&bundle)]);
    let manifest = json(&std::fs::read_to_string(bundle.join("manifest.json")).unwrap());
    assert_eq!(manifest["format"], "mpiforge-bundle");
    assert_eq!(manifest["depth_count"], 4);
    assert_eq!(manifest["atlas"]["columns"], 2);
    assert_eq!(manifest["atlas"]["rows"], 2);
    let depths: Vec<f64> = manifest["depths"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d.as_f64().unwrap())
        .collect();
    assert!(depths.windows(2).all(|d| d[0] > d[1]));
    let atlas = image::open(bundle.join("atlas.png")).unwrap();
    assert_eq!((atlas.width(), atlas.height()), (2 * 64, 2 * 48));

    let back = dir.path().join("back.cmpi");
    ok(&[
        "convert",
        "--input",
        p(&bundle),
        "--output",
        p(&back),
        "--quantization",
        "u8",
    ]);
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let pose = dir.path().join("heldout.json");
    ok(&["render", "--mpi", p(&mpi), "--pose", p(&pose), "--out", p(&a)]);
    ok(&["render", "--mpi", p(&back), "--pose", p(&pose), "--out", p(&b)]);
    let report = json(&ok(&["metrics", p(&a), p(&b)]));
    // 8-bit atlas: close to, not equal to, the f32 original
    assert!(report["l1"].as_f64().unwrap() < 0.01, "{report}");
}

#[test]
fn loss_report_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let mpi = build(dir.path(), "1");
    let report = json(&ok(&[
        "loss",
        "--mpi",
        p(&mpi),
        "--rig",
        p(&dir.path().join("rig.json")),
    ]));
    let excess = report["excess"].as_f64().unwrap();
    let a_min = report["a_min"].as_f64().unwrap();
    let pixels = (64 * 48) as f64;
    let sparsity = excess / pixels + (1.0 - a_min).max(0.0);
    assert!(excess >= 0.0);
    assert!((report["sparsity_loss"].as_f64().unwrap() - sparsity).abs() <= 1e-12);
    assert_eq!(report["lambda"].as_f64(), Some(0.1));
    let total = report["total_loss"].as_f64().unwrap();
    let expected = report["synthesis_error"].as_f64().unwrap() + 0.1 * report["sparsity_loss"].as_f64().unwrap();
    assert!((total - expected).abs() <= 1e-12);
}

#[test]
fn adapt_reports_the_new_sampling() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5");
    let out = dir.path().join("adapted.cmpi");
    let rig = dir.path().join("rig.json");
    let mut args = vec!["adapt", "--rig", p(&rig), "--out", p(&out), "--steps", "2"];
    args.extend(SAMPLING);
    let depths = json(&ok(&args));
    let depths: Vec<f64> = depths.as_array().unwrap().iter().map(|d| d.as_f64().unwrap()).collect();
    assert_eq!(depths.len(), 10);
    assert!(depths.windows(2).all(|d| d[0] > d[1]));
    assert!(out.exists());
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6");
    let first = std::fs::read(build(dir.path(), "1")).unwrap();
    let second = std::fs::read(build(dir.path(), "1")).unwrap();
    assert_eq!(first, second);

    let other = tempfile::tempdir().unwrap();
    synth(other.path(), "6");
    assert_eq!(
        std::fs::read(dir.path().join("view_0.png")).unwrap(),
        std::fs::read(other.path().join("view_0.png")).unwrap()
    );
}

#[test]
fn exit_codes_separate_usage_from_domain_errors() {
    assert_eq!(mpiforge(&[]).status.code(), Some(2));
    assert_eq!(mpiforge(&["build", "--rig"]).status.code(), Some(2));
    assert_eq!(mpiforge(&["synth", "--out", "x"]).status.code(), Some(2));
    // parses, but violates the one-step minimum
    let out = mpiforge(&["build", "--rig", "r.json", "--out", "o.cmpi", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.cmpi");
    let out = mpiforge(&[
        "render",
        "--mpi",
        p(&missing),
        "--pose",
        p(&missing),
        "--out",
        p(&dir.path().join("o.png")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cmpi"));

    let garbage = dir.path().join("garbage.cmpi");
    std::fs::write(&garbage, b"CMPI\x01\x00").unwrap();
    let out = mpiforge(&["convert", "--input", p(&garbage), "--output", p(&dir.path().join("b"))]);
    assert_eq!(out.status.code(), Some(1));

    synth(dir.path(), "0");
    let mpi = build(dir.path(), "1");
    let out = mpiforge(&[
        "render",
        "--mpi",
        p(&mpi),
        "--pose",
        p(&dir.path().join("heldout.json")),
        "--out",
        p(&dir.path().join("o.png")),
        "--threshold",
        "0.99",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
