use std::path::Path;
use std::process::{Command, Output};

use lmnet::interface::Checkpoint;
use lmnet::models::{Head, ImageEncoder, ModelConfig};
use lmnet::training::Stage;

fn lmnet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmnet"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) {
    std::fs::write(
        dir.join("run.cfg"),
        "# smoke-test sizes\nper_category = 5\nbatch_size = 4\nae_epochs = 1\nlm_epochs = 1\nviews_per_shape = 1\n",
    )
    .unwrap();
}

#[test]
fn eval_without_checkpoint_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lmnet(&["eval"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ckpt"));
}

#[test]
fn unknown_subcommand_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lmnet(&["train-everything"], dir.path()).status.code(), Some(1));
    let out = lmnet(&["gen-data", "--colour"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(lmnet(&["train-lm", "--variant", "l3"], dir.path()).status.code(), Some(1));
    assert_eq!(lmnet(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // no dataset yet
    let out = lmnet(&["train-ae", "--epochs", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-data"));
    std::fs::write(dir.path().join("bad.cfg"), "epochs = 3\n").unwrap();
    let out = lmnet(&["--config", "bad.cfg", "gen-data"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.cfg:1"));
}

#[test]
fn smoke_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let run = |args: &[&str]| {
        let mut all = vec!["--config", "run.cfg", "--seed", "4"];
        all.extend_from_slice(args);
        let out = lmnet(&all, d);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["gen-data"]);
    assert_eq!(std::fs::read_dir(d.join("out/data/views")).unwrap().count(), 20 * 24);
    run(&["train-ae", "--epochs", "1"]);
    assert!(d.join("out/ae.ckpt").exists());
    assert!(d.join("out/ae_log.tsv").exists());
    run(&["train-lm", "--variant", "l2"]);
    run(&["eval", "--ckpt", "out/lm-l2.ckpt", "--icp", "off"]);
    let table = std::fs::read_to_string(d.join("out/eval-lm-l2.tsv")).unwrap();
    assert!(table.starts_with("model\tcategory\tchamfer_x100"));
    assert_eq!(table.lines().count(), 6);
    run(&["reconstruct", "--ckpt", "out/lm-l2.ckpt", "--image", "out/data/views/chairlike-0000_a180.pgm"]);
    let ply = std::fs::read(d.join("out/reconstruction.ply")).unwrap();
    assert!(String::from_utf8_lossy(&ply[..200]).contains("element vertex 2048"));
    run(&["train-prob", "--epochs", "1"]);
    run(&["diversity", "--ckpt", "out/prob.ckpt", "--samples", "3"]);
    let div = std::fs::read_to_string(d.join("out/diversity.tsv")).unwrap();
    assert_eq!(div.lines().count(), 1 + 4 * 24);

    // Stage II refuses a checkpoint without the auto-encoder blocks.
    let img = ImageEncoder::new(&ModelConfig::desk(), Head::Deterministic, 0).unwrap();
    let echo = std::fs::read_to_string(d.join("run.cfg")).unwrap();
    Checkpoint::new(Stage::LatentMatching, echo, &[img.params()])
        .save(&d.join("img-only.ckpt"))
        .unwrap();
    let out = lmnet(&["--config", "run.cfg", "train-lm", "--variant", "l1", "--ckpt", "img-only.ckpt"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage"));
}
