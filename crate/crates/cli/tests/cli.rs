use std::path::{Path, PathBuf};
use std::process::Command;

use headcam_cli::commands::{self, FixtureKind};
use headcam_cli::config::{resolve, RunConfig, RESOLVED_CONFIG_FILE};
use headcam_core::Error;
use toml::Value;

const SMALL: &str = r#"
seed = 1
[data.episodic]
n_episodes = 3
frames_per_episode = 20
[data.shapes]
n_classes = 3
exemplars_per_class = 5
views_per_exemplar = 2
[train]
epochs = 2
batch_size = 16
segment_length_s = 20.0
[analysis]
cam_images = 1
top_sample = 16
top_k = 4
"#;

fn headcam(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_headcam")).args(args).current_dir(cwd).output().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, SMALL).unwrap();
    path
}

fn with_output(cfg: &RunConfig, dir: &Path) -> RunConfig {
    RunConfig { output_dir: Some(dir.to_path_buf()), ..cfg.clone() }
}

/// synth, train, probe and analyze under `root`; returns the result documents.
fn pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = resolve(Some(&small_config(root)), &[]).unwrap();
    commands::synth(&with_output(&cfg, &root.join("ep")), FixtureKind::Episodic).unwrap();
    commands::synth(&with_output(&cfg, &root.join("sh")), FixtureKind::Shapes).unwrap();
    commands::train_cmd(&with_output(&cfg, &root.join("train")), &root.join("ep"), None).unwrap();
    let model = root.join("train").join("model.ckpt");
    commands::probe_cmd(&with_output(&cfg, &root.join("probe")), &root.join("sh"), Some(&model)).unwrap();
    commands::analyze_cmd(&with_output(&cfg, &root.join("analysis")), &root.join("sh"), Some(&model)).unwrap();
    ["train/train_summary.json", "probe/results.json", "analysis/analysis.json", "analysis/csi.csv", "analysis/pca.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(root.join(f)).unwrap()))
        .collect()
}

#[test]
fn seeded_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline(a.path());
    assert_eq!(first, pipeline(b.path()));
    for sub in ["ep", "train", "probe", "analysis"] {
        assert!(a.path().join(sub).join(RESOLVED_CONFIG_FILE).exists(), "{sub}");
    }
    let written = headcam_cli::plot::report(&a.path().join("train")).unwrap();
    assert_eq!(written.len(), 2);
    assert!(a.path().join("train/report/loss.csv").exists());
}

#[test]
fn includes_and_overrides_layer_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("base.toml"), "seed = 3\n[train]\nlr = 0.1\nepochs = 7\n").unwrap();
    std::fs::write(tmp.path().join("run.toml"), "include = \"base.toml\"\n[train]\nlr = 0.2\n").unwrap();
    let cfg = resolve(Some(&tmp.path().join("run.toml")), &[("train.epochs".into(), Value::Integer(9))]).unwrap();
    assert_eq!((cfg.seed, cfg.train.lr, cfg.train.epochs), (3, 0.2, 9));

    let back: RunConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);

    std::fs::write(tmp.path().join("bad.toml"), "[train]\nlearning_rate = 0.1\n").unwrap();
    assert!(matches!(resolve(Some(&tmp.path().join("bad.toml")), &[]), Err(Error::Config(_))));
    std::fs::write(tmp.path().join("loop.toml"), "include = \"loop.toml\"\n").unwrap();
    assert!(matches!(resolve(Some(&tmp.path().join("loop.toml")), &[]), Err(Error::Config(_))));
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let code = |args: &[&str]| headcam(args, tmp.path()).status.code().unwrap();

    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["--config", cfg, "--set", "train.nope=1", "synth", "shapes", "--output-dir", "x"]), 2);
    assert_eq!(code(&["--config", cfg, "synth", "shapes"]), 2);
    assert_eq!(code(&["--config", cfg, "train", "--data", "missing", "--output-dir", "t"]), 3);

    let ok = headcam(&["--config", cfg, "synth", "episodic", "--output-dir", "ep"], tmp.path());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(code(&["--config", cfg, "train", "--data", "ep", "--lr", "-1", "--output-dir", "t"]), 2);
    assert_eq!(code(&["--config", cfg, "train", "--data", "ep", "--objective", "sideways", "--output-dir", "t"]), 2);
    assert_eq!(code(&["--config", cfg, "train", "--data", "ep", "--lr", "1e30", "--epochs", "4", "--output-dir", "t"]), 4);
}

#[test]
fn cli_resume_continues_the_same_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let run = |args: &[&str]| {
        let out = headcam(args, tmp.path());
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    run(&["--config", cfg, "synth", "episodic", "--output-dir", "ep"]);
    let full = run(&["--config", cfg, "train", "--data", "ep", "--epochs", "3", "--output-dir", "full"]);
    run(&["--config", cfg, "train", "--data", "ep", "--epochs", "1", "--output-dir", "part"]);
    let resumed = run(&["--config", cfg, "train", "--data", "ep", "--epochs", "3", "--resume", "part/checkpoint.ckpt", "--output-dir", "part"]);
    assert_eq!(full["final_loss"], resumed["final_loss"]);
    assert_eq!(full["steps"], resumed["steps"]);
    assert_eq!(std::fs::read(tmp.path().join("full/model.ckpt")).unwrap(), std::fs::read(tmp.path().join("part/model.ckpt")).unwrap());
}

#[test]
fn probe_variants_and_embedding_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let cache = tmp.path().join("cache");
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_headcam")).args(args).current_dir(tmp.path()).env("HEADCAM_CACHE_DIR", &cache).output().unwrap();
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    run(&["--config", cfg, "synth", "shapes", "--output-dir", "sh"]);
    let a = run(&["--config", cfg, "probe", "--data", "sh", "--features", "random", "--output-dir", "p1"]);
    assert_eq!(std::fs::read_dir(cache.join("embeddings")).unwrap().count(), 1);
    let b = run(&["--config", cfg, "probe", "--data", "sh", "--features", "random", "--output-dir", "p2"]);
    assert_eq!(a, b);
    let hog = run(&["--config", cfg, "--set", "probe.hog.cell_px=4", "probe", "--data", "sh", "--features", "hog", "--split", "exemplar", "--output-dir", "p3"]);
    assert_eq!(hog["family"], "linear_hinge");
    assert_eq!(hog["split"], "exemplar_holdout");
    let sub = run(&["--config", cfg, "probe", "--data", "sh", "--features", "random", "--split", "subsample", "--factor", "3", "--output-dir", "p4"]);
    assert_eq!(sub["n_train"].as_u64().unwrap() + sub["n_test"].as_u64().unwrap(), 10);
    let two = run(&["--config", cfg, "--set", "probe.binary=[\"disk\",\"ring\"]", "probe", "--data", "sh", "--features", "random", "--output-dir", "p5"]);
    assert_eq!(two["n_classes"], 2);
}
