use std::fs;
use std::process::Command;

fn qfock() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qfock"))
}

#[test]
fn verify_subcommand_passes_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfock()
        .args([
            "verify", "--n", "2", "--q", "0.3,-0.3", "--levels", "4", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# small run\nn = 2\nq_list = [0.5]\nlevels = 3\nsuites = [gram-oracle]\n",
    )
    .unwrap();
    let out = qfock()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--q", "0.2", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["config"]["q_list"][0], 0.2);
}

#[test]
fn gram_subcommand_dumps_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfock()
        .args(["gram", "--n", "2", "--q", "0.5", "--levels", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("gram_q0.5/gram_2.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), ",1.1,1.2,2.1,2.2");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn invalid_parameters_exit_with_code_two() {
    let out = qfock().args(["verify", "--q", "1.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q"));
    let out = qfock()
        .args(["run", "--suites", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decay_subcommand_prints_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = qfock()
        .args([
            "decay", "--n", "2", "--q", "-0.4", "--levels", "6", "--k-max", "2", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("k,value\n0,"));
    assert!(dir.path().join("decay_q-0.4.csv").exists());
}
