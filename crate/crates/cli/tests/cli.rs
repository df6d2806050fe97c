use std::path::Path;
use std::process::{Command, Output};

fn palmcox(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_palmcox"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir)
        .env_remove("PALMCOX_OUT")
        .output()
        .unwrap()
}

#[test]
fn zero_volume_window_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = palmcox(
        tmp.path(),
        "model = \"euclidean2\"\n[window]\nlo = [0.0, 0.0]\nhi = [1.0, 0.0]\n",
        &["intensity", "--replicates", "10"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!tmp.path().join("palmcox-out").exists());
}

#[test]
fn malformed_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = palmcox(tmp.path(), "seed = [", &["sample"]);
    assert_eq!(out.status.code(), Some(2));
    let out = palmcox(tmp.path(), "sede = 3\n", &["sample"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = palmcox(
        tmp.path(),
        "model = \"euclidean2\"\n[thresholds]\nsigmas = 1e-9\n",
        &["intensity", "--replicates", "200"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("palmcox-out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn out_flag_beats_environment_beats_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "output = \"from-config\"\n[window]\nside = 2.0\n").unwrap();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_palmcox"));
        c.arg("sample").arg("--config").arg(&cfg).current_dir(tmp.path());
        c.env_remove("PALMCOX_OUT");
        if let Some(e) = env {
            c.env("PALMCOX_OUT", e);
        }
        if let Some(f) = flag {
            c.args(["--out", f]);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
    };
    run(None, None);
    assert!(tmp.path().join("from-config/sample.txt").exists());
    run(Some("from-env"), None);
    assert!(tmp.path().join("from-env/sample.txt").exists());
    run(Some("from-env-2"), Some("from-flag"));
    assert!(tmp.path().join("from-flag/sample.txt").exists());
    assert!(!tmp.path().join("from-env-2").exists());
}

#[test]
fn seed_flag_changes_the_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[window]\nside = 3.0\n";
    palmcox(tmp.path(), cfg, &["sample", "--seed", "1", "--out", "a"]);
    palmcox(tmp.path(), cfg, &["sample", "--seed", "2", "--out", "b"]);
    let a = std::fs::read(tmp.path().join("a/sample.txt")).unwrap();
    let b = std::fs::read(tmp.path().join("b/sample.txt")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn cost_report_has_interval_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let out = palmcox(tmp.path(), "[star]\nsides = [4]\n", &["cost", "--replicates", "2"]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let csv = std::fs::read_to_string(tmp.path().join("palmcox-out/cost.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    for col in ["avg_degree_std_err", "ci_low", "ci_high", "giant_fraction_std_err"] {
        assert!(header.split(',').any(|c| c == col), "{col} missing from {header}");
    }
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2);
}
