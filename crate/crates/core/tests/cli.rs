use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use usdn::data::{load_cube, save_cube, ImageCube};

fn usdn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usdn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_scene(dir: &Path) {
    let spec = dir.join("scene.kv");
    fs::write(&spec, "width = 16\nheight = 16\nratio = 4\n").unwrap();
    let out = usdn(&["synth", "--spec", s(&spec), "--out", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn fuse(dir: &Path, out_dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.kv");
    fs::write(&cfg, "hsi_iters = 60\nmsi_iters = 40\nlog_every = 5\n").unwrap();
    let (hsi, msi, resp, hr) = (
        dir.join("lr_hsi.hsc"),
        dir.join("hr_msi.hsc"),
        dir.join("response.csv"),
        dir.join("hr_hsi.hsc"),
    );
    let mut args = vec![
        "fuse", "--hsi", s(&hsi), "--msi", s(&msi), "--response", s(&resp),
        "--config", s(&cfg), "--ref", s(&hr), "--out", s(out_dir),
    ];
    args.extend_from_slice(extra);
    usdn(&args)
}

#[test]
fn synth_writes_scene_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    small_scene(tmp.path());
    for f in ["hr_hsi.hsc", "lr_hsi.hsc", "hr_msi.hsc", "response.csv", "phi_true.csv", "truth.hsck", "manifest.txt"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let lr = load_cube(&tmp.path().join("lr_hsi.hsc")).unwrap().cube;
    assert_eq!(lr.dims(), (4, 4, 31));
    let manifest = fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("width = 16"));
    assert!(manifest.contains("sha256:"));
}

#[test]
fn fuse_then_eval_and_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_scene(dir);
    let out_dir = dir.join("run");
    let out = fuse(dir, &out_dir, &["--set", "seed=3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["fused.hsc", "trace_hsi.csv", "trace_msi.csv", "checkpoint.hsck", "basis.csv", "metrics.csv", "manifest.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 3"));
    assert!(manifest.contains("hsi_iters = 60"));
    assert_eq!(manifest.matches("sha256:").count(), 5);

    let trace = fs::read_to_string(out_dir.join("trace_msi.csv")).unwrap();
    assert!(trace.starts_with("step,loss_recon,loss_entropy,loss_angle,rowsum_mean\n"));
    let angle_rows = trace.lines().skip(1).filter(|l| !l.split(',').nth(3).unwrap().is_empty()).count();
    assert_eq!(angle_rows, 4);

    let csv = out_dir.join("eval.csv");
    let out = usdn(&["eval", "--est", s(&out_dir.join("fused.hsc")), "--ref", s(&dir.join("hr_hsi.hsc")), "--out", s(&csv)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("rmse_8bit,rmse_unit,sam_degrees,pixels,bands,excluded_pixels\n"));
    let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[3], "256");
    assert_eq!(fields[4], "31");

    let png = dir.join("band.png");
    let out = usdn(&["inspect", "--cube", s(&out_dir.join("fused.hsc")), "--band", "10", "--png", s(&png)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(&fs::read(&png).unwrap()[1..4], b"PNG");

    let hist = dir.join("hist.csv");
    let out = usdn(&["inspect", "--repr", s(&out_dir.join("checkpoint.hsck")), "--hist", s(&hist), "--bins", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&hist).unwrap();
    assert_eq!(text.lines().count(), 11);
    let total: usize = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 256 * 10);
}

#[test]
fn fuse_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_scene(dir);
    let (a, b) = (dir.join("a"), dir.join("b"));
    assert!(fuse(dir, &a, &[]).status.success());
    assert!(fuse(dir, &b, &[]).status.success());
    for f in ["fused.hsc", "trace_hsi.csv", "trace_msi.csv", "checkpoint.hsck", "basis.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn non_integer_ratio_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_scene(dir);
    let odd = ImageCube::zeros(15, 16, 3).unwrap();
    save_cube(&odd, &dir.join("hr_msi.hsc")).unwrap();
    let out_dir = dir.join("bad");
    let out = usdn(&[
        "fuse", "--hsi", s(&dir.join("lr_hsi.hsc")), "--msi", s(&dir.join("hr_msi.hsc")),
        "--response", s(&dir.join("response.csv")), "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_scene(dir);
    for bad in [&["--set", "colour=red"][..], &["--set", "angle_period=0"], &["--set", "optimizer=sgd"]] {
        let out_dir = dir.join("bad");
        let out = fuse(dir, &out_dir, bad);
        assert_eq!(out.status.code(), Some(2), "{bad:?}");
        assert!(!out_dir.exists());
    }
}

#[test]
fn diverging_run_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_scene(dir);
    let out_dir = dir.join("nan");
    let out = fuse(dir, &out_dir, &["--set", "learning_rate=1e300", "--set", "hidden_activation=identity"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flags_are_rejected() {
    let out = usdn(&["check-grad", "--seed", "1", "--verbose"]);
    assert_eq!(out.status.code(), Some(2));
    let out = usdn(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_grad_is_deterministic() {
    let a = usdn(&["check-grad", "--seed", "7"]);
    let b = usdn(&["check-grad", "--seed", "7"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).matches("PASS").count(), 3);
}

#[test]
fn malformed_cube_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.hsc");
    fs::write(&bad, b"HSC1\x02\x00\x00\x00").unwrap();
    let out = usdn(&["eval", "--est", s(&bad), "--ref", s(&bad), "--out", s(&tmp.path().join("e.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte offset"));
}
