use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ruelle(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SIN: &str = r#"{"map": {"p1": [[0, 0]], "p2": [[0, 0], [1, 0]], "p3": [[0, 0], [1, 0]]}, "normalize": false}"#;

fn entry_count(dir: &Path, cfg: &str, radius: &str) -> usize {
    let out = ruelle(&["critical", "--config", cfg, "--radius", radius], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    v["entries"].as_array().unwrap().len()
}

#[test]
fn critical_entries_follow_the_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sin.json", SIN);
    assert_eq!(entry_count(dir.path(), &cfg, "10"), 6);
    // Zeros of cos inside |z| < R: 2·⌊R/π + 1/2⌋.
    for r in [20.0f64, 40.0] {
        let want = 2 * (r / std::f64::consts::PI + 0.5).floor() as usize;
        assert_eq!(entry_count(dir.path(), &cfg, &r.to_string()), want);
    }
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"radius\": ");
    let out = ruelle(&["critical", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ruelle(&["critical", "--radius", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = ruelle(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_sign_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruelle(&["verify", "--out", "checks.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checks: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    let checks = checks.as_array().unwrap();
    assert!(checks.iter().all(|c| c["passed"] == true));
    for name in ["oracle", "defect", "duality"] {
        assert!(checks.iter().any(|c| c["name"] == name));
    }

    let out = ruelle(&["verify", "--check", "oracle,defect", "--inject-b-sign-fault"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let checks: Value = serde_json::from_slice(&out.stdout).unwrap();
    let oracle = checks.as_array().unwrap().iter().find(|c| c["name"] == "oracle").unwrap();
    assert_eq!(oracle["passed"], false);
}

#[test]
fn empty_check_selection() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruelle(&["verify", "--check", ""], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 0);
    let out = ruelle(&["verify", "--check", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

fn read_field(dir: &Path, prefix: &str) -> (Vec<Vec<f64>>, Vec<Vec<u32>>) {
    let csv = std::fs::read_to_string(dir.join(format!("{prefix}.csv"))).unwrap();
    let rows = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    let pgm = std::fs::read_to_string(dir.join(format!("{prefix}.pgm"))).unwrap();
    let mut lines = pgm.lines();
    assert_eq!(lines.next(), Some("P2"));
    lines.next();
    assert_eq!(lines.next(), Some("255"));
    let pix = lines.map(|l| l.split(' ').map(|x| x.parse().unwrap()).collect()).collect();
    (rows, pix)
}

#[test]
fn field_grid_and_raster() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruelle(&["field", "--grid", "64", "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (rows, pix) = read_field(dir.path(), "a");
    assert_eq!(rows.len(), 4096);
    assert_eq!(pix.len(), 64);
    assert!(pix.iter().all(|r| r.len() == 64));
    // Pixel nearest to a pole: column from re, row from im measured from the top.
    let px = |re: f64, im: f64| {
        let col = ((re + 3.0) / 6.0 * 63.0).round() as usize;
        let row = ((3.0 - im) / 6.0 * 63.0).round() as usize;
        pix[row][col]
    };
    assert_eq!(px(0.0, 0.0), 255);
    assert_eq!(px(1.0, 0.0), 255);

    // Grid n and 2n − 1 share every node of the coarse grid.
    let out = ruelle(&["field", "--grid", "127", "--out", "b"], dir.path());
    assert!(out.status.success());
    let (fine, _) = read_field(dir.path(), "b");
    let n = 64;
    for r in 0..n {
        for c in 0..n {
            let a = &rows[r * n + c];
            let b = &fine[(2 * r) * (2 * n - 1) + 2 * c];
            assert_eq!(a[0], b[0]);
            assert_eq!(a[1], b[1]);
            for k in 2..4 {
                assert!((a[k] - b[k]).abs() <= 1e-12 * a[k].abs().max(1.0));
            }
        }
    }
}

#[test]
fn summability_and_relation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ruelle(&["summability", "--csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.contains(",summable,")));

    let out = ruelle(&["relation"], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"]["verdict"], "Yes");
    assert_eq!(v["limit"]["decreasing"], true);
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = ruelle(&["relation", "--seed", "3"], dir.path());
    let b = ruelle(&["relation", "--seed", "3"], dir.path());
    assert_eq!(a.stdout, b.stdout);
}
