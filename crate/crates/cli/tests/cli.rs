use std::path::Path;
use std::process::{Command, Output};

fn trisplat(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trisplat")).args(args).current_dir(cwd).env_remove("TRISPLAT_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL_SPEC: &str = "primitives = 8\ncameras = 6\nwidth = 24\nheight = 20\nholdout_every = 3\n";

#[test]
fn gradcheck_passes_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = trisplat(&["--seed", "7", "gradcheck"], dir.path());
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("max relative error"));
}

#[test]
fn missing_config_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = trisplat(&["train", "nope.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_verb_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = trisplat(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn printed_defaults_are_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = trisplat(&["train", "--print-defaults"], dir.path());
    assert!(out.status.success());
    let path = dir.path().join("defaults.toml");
    std::fs::write(&path, out.stdout).unwrap();
    let cfg = trisplat_io::config::load_run_config(&path).unwrap();
    assert_eq!(cfg.train, trisplat_core::train::TrainConfig::default());
}

#[test]
fn synthetic_train_export_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("spec.toml"), SMALL_SPEC).unwrap();
    let out = trisplat(&["make-synthetic", "spec.toml", "-o", "fixture"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fx = root.join("fixture");
    for f in ["transforms_train.json", "transforms_test.json", "ground_truth.snap", "ground_truth.glb", "points.ply", "train.toml"] {
        assert!(fx.join(f).exists(), "{f}");
    }
    assert!(trisplat_io::config::load_run_config(&fx.join("train.toml")).is_ok());

    // ground truth evaluated against its own renders
    let out = trisplat(
        &["eval", "fixture/ground_truth.snap", "fixture", "--mesh", "fixture/ground_truth.glb", "--samples", "2000", "--background", "0,0,0"],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["psnr"].as_f64().unwrap() > 45.0, "{report}");
    assert_eq!(report["chamfer"]["mean"].as_f64().unwrap(), 0.0);
    assert_eq!(report["primitives"].as_u64().unwrap(), 8);

    let cfg = "dataset = \".\"\noutput = \"run\"\npoint_cloud = \"points.ply\"\nbackground = [0.0, 0.0, 0.0]\n\
               snapshot_interval = 5\ninit_opacity = 0.9\nstage_iters = [5, 5, 5]\nsh_degree = 0\nlog_interval = 5\ntest_interval = 5\n";
    std::fs::write(fx.join("short.toml"), cfg).unwrap();
    let out = trisplat(&["--threads", "2", "train", "fixture/short.toml"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("held-out PSNR"));
    let run = fx.join("run");
    for f in ["scene.snap", "metrics.csv", "scene_000005.snap", "scene_000015.snap"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let out = trisplat(&["export-mesh", "fixture/run/scene.snap", "-o", "mesh.glb"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scene = trisplat_io::snapshot::load_snapshot(&run.join("scene.snap")).unwrap();
    assert_eq!(trisplat_io::glb::import_mesh(&root.join("mesh.glb")).unwrap().len(), scene.len());

    std::fs::write(
        root.join("cam.json"),
        r#"{"width": 16, "height": 12, "fov_x_deg": 50, "eye": [0, 3, 3], "target": [0, 0, 0]}"#,
    )
    .unwrap();
    let out = trisplat(&["render", "fixture/run/scene.snap", "cam.json", "-o", "view.png", "--all-buffers"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["view.png", "view.depth.png", "view.normal.png", "view.alpha.png"] {
        assert!(root.join(f).exists(), "{f}");
    }
}

#[test]
fn training_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("spec.toml"), SMALL_SPEC).unwrap();
    assert!(trisplat(&["make-synthetic", "spec.toml", "-o", "fx"], root).status.success());
    let cfg = "dataset = \".\"\npoint_cloud = \"points.ply\"\nbackground = [0.0, 0.0, 0.0]\nstage_iters = [4, 4, 4]\nsh_degree = 0\nlog_interval = 1\n";
    let mut logs = Vec::new();
    for threads in ["1", "3"] {
        std::fs::write(root.join("fx/t.toml"), format!("output = \"out{threads}\"\n{cfg}")).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_trisplat"))
            .args(["--deterministic", "train", "fx/t.toml"])
            .env("TRISPLAT_THREADS", threads)
            .current_dir(root)
            .output()
            .unwrap();
        assert!(out.status.success());
        logs.push(std::fs::read(root.join(format!("fx/out{threads}/metrics.csv"))).unwrap());
        logs.push(std::fs::read(root.join(format!("fx/out{threads}/scene.snap"))).unwrap());
    }
    assert_eq!(logs[0], logs[2]);
    assert_eq!(logs[1], logs[3]);
}
