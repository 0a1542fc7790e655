use std::path::Path;
use std::process::{Command, Output};

fn gaugebeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaugebeam")).args(args).output().expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// A reduced copy of a bundled configuration written next to the outputs.
fn small_config(dir: &Path, base: &str, replacements: &[(&str, &str)]) -> String {
    let mut text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{base}.toml"))).unwrap();
    for (from, to) in replacements {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join(format!("{base}-small.toml"));
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &[(&str, &str)] = &[
    ("points = 12", "points = 6"),
    ("directions = 4", "directions = 2"),
    ("s-list = [32.0, 64.0, 128.0]", "s-list = [32.0, 64.0]"),
    ("grid = 32", "grid = 24"),
    ("grids = [8, 16, 32]", "grids = [8, 16]"),
];

#[test]
fn flat_identity_is_all_green_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "flat-identity", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = gaugebeam(&["--config", &cfg, "--out", dir.to_str().unwrap(), "run"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let m = manifest(&a);
    assert_eq!(m["passed"], true);
    let rows = m["checks"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["passed"] == true && r["anchor"].as_str().is_some_and(|s| !s.is_empty())));
    for anchor in ["parallel-transport-unitarity", "scattering-trivial-connection", "candidate-gauge", "dtn-gauge-invariance"] {
        assert!(rows.iter().any(|r| r["anchor"] == anchor), "{anchor}");
    }
    let mut csvs = 0;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        if name.ends_with(".csv") || name.ends_with(".json") || name.ends_with(".py") {
            assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name} differs between runs");
            csvs += usize::from(name.ends_with(".csv"));
        }
    }
    assert!(csvs >= 8);
    assert!(a.join("plot_residual.py").is_file() && a.join("plot_recovery.py").is_file());
}

#[test]
fn gauge_pair_reports_gauge_invariance_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "gauge-pair", &[("points = 20", "points = 6"), ("directions = 5", "directions = 3")]);
    let dir = tmp.path().join("out");
    let out = gaugebeam(&["--config", &cfg, "--out", dir.to_str().unwrap(), "scatter"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = manifest(&dir)["checks"].as_array().unwrap().clone();
    let gap = rows.iter().find(|r| r["anchor"] == "scattering-gauge-invariance").expect("scattering row");
    assert!(gap["value"].as_f64().unwrap() <= 1e-7);

    let out = gaugebeam(&["--config", &cfg, "--out", dir.to_str().unwrap(), "schrod"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = manifest(&dir)["checks"].as_array().unwrap().clone();
    let dtn: Vec<_> = rows.iter().filter(|r| r["anchor"] == "dtn-gauge-invariance").collect();
    assert_eq!(dtn.len(), 2);
    assert!(dtn.iter().all(|r| r["passed"] == true));
}

#[test]
fn art_subcommands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "flat-identity", SMALL);
    let dir = tmp.path().join("art");
    for (mode, file) in [("forward", "art_data.csv"), ("invert", "art_recovered.csv"), ("gauge", "gauge.csv")] {
        let out = gaugebeam(&["--config", &cfg, "--out", dir.to_str().unwrap(), "art", mode]);
        assert!(out.status.success(), "{mode}: {}", String::from_utf8_lossy(&out.stdout));
        assert!(dir.join(file).is_file(), "{file}");
    }
}

#[test]
fn verify_smoke_runs_selected_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gaugebeam(&["verify", "--smoke", "--only", "C3,C4", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    assert!(stdout.contains("[riccati-determinant]"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn failed_check_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "gauge-pair", &[("points = 20", "points = 4"), ("directions = 5", "directions = 2"), ("scattering-gap = 1e-7", "scattering-gap = 1e-30")]);
    let out = gaugebeam(&["--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap(), "scatter"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL scatter/max_scattering_gap"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    assert_eq!(gaugebeam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gaugebeam(&["--config", "/nonexistent/config.toml", "geodesic"]).status.code(), Some(2));
    assert_eq!(gaugebeam(&["verify", "--only", "C42"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "flat-identity", &[("a1 = { kind = \"zero\" }", "a1 = { kind = \"wavelet\" }")]);
    assert_eq!(gaugebeam(&["--config", &cfg, "geodesic"]).status.code(), Some(2));
}

#[test]
fn plots_on_empty_directory_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gaugebeam(&["plots", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}
