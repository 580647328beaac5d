//! The `weylstrat` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use weylstrat::cli::{run_property, VerifyOptions, FD_TOLERANCE_ENV};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weylstrat"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(config: &Path, out: &Path, overrides: &[&str]) -> Output {
    let mut cmd = bin();
    cmd.arg("run").arg(config).arg("--out").arg(out);
    for o in overrides {
        cmd.arg("--override").arg(o);
    }
    cmd.output().unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn undersized_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("sphere2.toml"), dir.path(), &["grid.density=2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.density"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("sphere2.toml"), dir.path(), &["grid.spacing=3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sphere_run_reports_homogeneity() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("sphere2.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "locally homogeneous");
    for name in ["invariant_field.csv", "level_sets.csv", "strata.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn revolution_level_sets_close_at_constant_height() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&scenario("revolution.toml"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "not locally homogeneous");
    let curves = r["level_sets"].as_array().unwrap();
    let closed: Vec<&Value> = curves.iter().filter(|c| c["closed"] == true).collect();
    assert!(!closed.is_empty());
    for c in closed {
        let spread = c["coord_max"][0].as_f64().unwrap() - c["coord_min"][0].as_f64().unwrap();
        assert!(spread < 1e-4, "{c}");
    }

    let csv = std::fs::read_to_string(dir.path().join("level_sets.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("curve_id,seq,coord_1,coord_2"));
    assert!(lines.count() > 100);
}

#[test]
fn runs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&scenario("revolution.toml"), a.path(), &[]);
    run(&scenario("revolution.toml"), b.path(), &[]);
    for name in ["report.json", "invariant_field.csv", "level_sets.csv", "strata.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn degenerate_inline_metric_exits_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("degenerate.toml");
    std::fs::write(
        &config,
        "[geometry]\ncoords = [\"x\", \"y\"]\nmetric = [\"x\", \"0\", \"1\"]\ndomain = [[-1, 1], [-1, 1]]\n\n[grid]\ndensity = 10\n",
    )
    .unwrap();
    let out = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&dir.path().join("out"));
    assert!(r["flagged_fraction"].as_f64().unwrap() >= 0.05);
}

#[test]
fn list_geometries_names_the_catalog() {
    let out = bin().arg("list-geometries").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for (name, _) in weylstrat::geometries::CATALOG {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn corrupted_sign_breaks_the_identities() {
    let opts = VerifyOptions { corrupt_sign: true, ..VerifyOptions::default() };
    assert!(!run_property("Bianchi identities", &opts).passed);
    assert!(run_property("Bianchi identities", &VerifyOptions::default()).passed);
}

#[test]
fn impossible_fd_tolerance_fails_the_oracle_row() {
    let out = bin().arg("verify").env(FD_TOLERANCE_ENV, "1e-15").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8_lossy(&out.stdout);
    let row = table.lines().find(|l| l.contains("finite-difference oracles")).unwrap();
    assert!(row.contains("FAIL"), "{row}");
    let row = table.lines().find(|l| l.contains("curvature symmetries")).unwrap();
    assert!(row.contains("PASS"), "{row}");
}
