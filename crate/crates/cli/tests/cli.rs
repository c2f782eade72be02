use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lattice-clt");

const SMALL_CLT: &str = r#"
experiment = "clt"
seed = 11
reps = 400

[model]
family = "kernel"
dim = 1
terms = [{ offset = [0], coefficient = 1.0 }, { offset = [1], coefficient = 0.5 }]

[scheme]
kind = "contiguous"
n = 256
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn svg_count(dir: &Path) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count()
}

#[test]
fn misspelled_key_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_CLT}\n[fdd]\nhurst_exponentt = 0.8\n"));
    let out = run(&["fdd", "--config", &cfg, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hurst_exponentt"));
}

#[test]
fn too_few_replications_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CLT);
    let out = run(&["clt", "--config", &cfg, "--reps", "50", "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("50") && err.contains("100"), "{err}");
}

#[test]
fn wrong_value_type_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_CLT.replace("reps = 400", "reps = \"many\""));
    let out = run(&["clt", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps"));
}

#[test]
fn subcommand_must_match_the_config() {
    let out = run(&["fdd", "--preset", "clt-iid-2d", "--out-dir", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn clt_run_writes_three_plots_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CLT);
    let dir = tmp.path().join("o");
    let out = run(&["clt", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["results.json", "samples.csv", "config.json", "manifest.json", "histogram.svg", "qq.svg", "trace.svg"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert_eq!(svg_count(&dir), 3);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], results["config_hash"]);
    assert_eq!(manifest["seed"], 11);
    let passed = results["passed"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if passed { 0 } else { 1 }));
}

#[test]
fn same_seed_gives_identical_csv_and_json_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CLT);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(&["clt", "--config", &cfg, "--out-dir", a.to_str().unwrap(), "--workers", "1"]);
    run(&["clt", "--config", &cfg, "--out-dir", b.to_str().unwrap(), "--workers", "3"]);
    for f in ["samples.csv", "results.json"] {
        let x = fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = tmp.path().join("c");
    run(&["clt", "--config", &cfg, "--out-dir", c.to_str().unwrap(), "--seed", "0x10"]);
    assert_ne!(fs::read(a.join("samples.csv")).unwrap(), fs::read(c.join("samples.csv")).unwrap());
}

#[test]
fn empty_battery_has_no_tests_and_no_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_CLT.replace("reps = 400", "reps = 400\ntests = []");
    let cfg = write_config(tmp.path(), &body);
    let dir = tmp.path().join("o");
    let out = run(&["clt", "--config", &cfg, "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["tests"], serde_json::json!([]));
    assert_eq!(svg_count(&dir), 0);
    assert!(dir.join("samples.csv").is_file());
}

#[test]
fn oracle_check_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["oracle-check", "--out-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn list_presets_prints_every_preset() {
    let out = run(&["--list-presets"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.contains("counterexample1") && text.contains("fdd-fbs-h08"));
}

#[test]
fn counterexample_selector_is_range_checked() {
    assert_eq!(run(&["counterexample", "--which", "3"]).status.code(), Some(2));
}
