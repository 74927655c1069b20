use std::process::Command;

fn qttt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qttt"))
}

#[test]
fn train_defaults_to_the_env_output_root() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"engines": ["ccnn-weaker"], "train": {"episodes": 10}}"#).unwrap();
    let status = qttt()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "3"])
        .env("QTTT_OUT", root.path())
        .status()
        .unwrap();
    assert!(status.success());
    let out = root.path().join("train");
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
    assert_eq!(std::fs::read_to_string(out.join("train/ccnn-weaker.csv")).unwrap().lines().count(), 11);
}

#[test]
fn failures_exit_non_zero_with_a_diagnostic() {
    let root = tempfile::tempdir().unwrap();
    let out = qttt()
        .args(["emit-plots", "--out"])
        .arg(root.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no result data"));

    let out = qttt().args(["train", "--config", "/nonexistent.json"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn serve_without_checkpoints_fails() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"serve": {"addr": "127.0.0.1:0"}}"#).unwrap();
    let out = qttt().args(["serve", "--config"]).arg(&cfg).arg("--out").arg(root.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no checkpoints"));
}
