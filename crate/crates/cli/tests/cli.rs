use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qscatter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qscatter"))
        .args(args)
        .output()
        .expect("spawn qscatter")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fig1_curves_start_at_one_and_vanish_where_expected() {
    let chi = 0.9;
    let out = qscatter(&["fig1", "--chi", "0.9", "--points", "501"]);
    assert!(out.status.success());
    let rows = csv_rows(std::str::from_utf8(&out.stdout).unwrap());
    assert_eq!(rows.len(), 501);
    assert_eq!(&rows[0][..], &[0.0, 1.0, 1.0, 1.0]);
    for r in &rows {
        assert!(r[3] <= r[1] + 1e-12 && r[1] <= r[2] + 1e-12);
    }

    let dir = TempDir::new().unwrap();
    let x0 = PI / (4.0 * chi);
    let cfg = write(
        &dir,
        "z.cfg",
        &format!("grid.lo = {x0}\ngrid.hi = {}\ngrid.points = 2\n", x0 + 1.0),
    );
    let out = qscatter(&["fig1", "--config", s(&cfg)]);
    let rows = csv_rows(std::str::from_utf8(&out.stdout).unwrap());
    assert!(rows[0][1].abs() < 1e-12 && rows[0][3].abs() < 1e-12);
}

#[test]
fn fig1_rejects_chi_out_of_range_without_output() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("f.csv");
    let out = qscatter(&["fig1", "--chi", "0.4", "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn malformed_config_reports_line_and_leaves_no_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.cfg",
        "preset = two-photon-chi09\ngrid.points = lots\n",
    );
    let out_path = dir.path().join("scan.csv");
    let out = qscatter(&["scan", "--config", s(&cfg), "--out", s(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 2") && err.contains("grid.points"),
        "{err}"
    );
    assert!(!out_path.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    let cfg = write(
        &dir,
        "typo.cfg",
        "preset = two-photon-chi09\ngird.points = 10\n",
    );
    let out = qscatter(&["scan", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gird.points"));
}

#[test]
fn scans_measure_expected_resolution() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "one.cfg", "preset = one-photon-backscatter\n");
    let data = dir.path().join("one.json");
    assert!(qscatter(&[
        "scan",
        "--config",
        s(&cfg),
        "--format",
        "json",
        "--out",
        s(&data)
    ])
    .status
    .success());
    let out = qscatter(&["visibility", "--data", s(&data)]);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((rep["visibility"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((rep["extrema_spacing"].as_f64().unwrap() / (PI / 4.0) - 1.0).abs() < 5e-3);
    assert_eq!(rep["domain"]["class"], "not_applicable");

    let chi = 0.9;
    let cfg = write(&dir, "two.cfg", "preset = two-photon-chi09\n");
    let data = dir.path().join("two.csv");
    assert!(qscatter(&["scan", "--config", s(&cfg), "--out", s(&data)])
        .status
        .success());
    let window = format!("{},{}", PI / 4.0 / chi, 3.0 * PI / 4.0 / chi);
    let out = qscatter(&[
        "visibility",
        "--data",
        s(&data),
        "--window",
        &window,
        "--config",
        s(&write(&dir, "v.cfg", "chi = 0.9\n")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        (rep["extrema_spacing"].as_f64().unwrap() / (PI / 7.2) - 1.0).abs() < 0.02,
        "{rep}"
    );
    assert_eq!(rep["domain"]["n"], 0);
}

#[test]
fn scan_then_fit_recovers_separation() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.cfg",
        "preset = coherent-backscatter\nscan = frequency\nnoise = 0.01\n",
    );
    let data = dir.path().join("d.json");
    let out = qscatter(&[
        "scan",
        "--config",
        s(&cfg),
        "--seed",
        "7",
        "--format",
        "json",
        "--out",
        s(&data),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit_cfg = write(&dir, "f.cfg", "preset = coherent-backscatter\n");
    let report = dir.path().join("fit.json");
    let out = qscatter(&[
        "fit",
        "--config",
        s(&fit_cfg),
        "--data",
        s(&data),
        "--out",
        s(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rep = json_file(&report);
    assert!((rep["a_hat"].as_f64().unwrap() - 1.3).abs() < 0.01, "{rep}");
    assert_eq!(rep["ambiguous"], false);
}

#[test]
fn unrestricted_two_photon_fit_is_ambiguous_and_prior_resolves_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.cfg",
        "preset = two-photon-chi09\nscan = frequency\n",
    );
    let data = dir.path().join("d.json");
    assert!(qscatter(&[
        "scan",
        "--config",
        s(&cfg),
        "--format",
        "json",
        "--out",
        s(&data)
    ])
    .status
    .success());

    let report = dir.path().join("fit.json");
    let fit_cfg = write(&dir, "f.cfg", "preset = two-photon-chi09\n");
    let out = qscatter(&[
        "fit",
        "--config",
        s(&fit_cfg),
        "--data",
        s(&data),
        "--out",
        s(&report),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let rep = json_file(&report);
    assert_eq!(rep["ambiguous"], true);
    let aliases: Vec<f64> = rep["aliases"]["aliases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(aliases.len() >= 2);
    assert!(aliases.iter().any(|a| (a - 1.3).abs() < 1e-3));

    let fit_cfg = write(
        &dir,
        "p.cfg",
        "preset = two-photon-chi09\nprior_domain = 1\n",
    );
    let out = qscatter(&["fit", "--config", s(&fit_cfg), "--data", s(&data)]);
    assert!(out.status.success());
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((rep["a_hat"].as_f64().unwrap() - 1.3).abs() < 1e-3, "{rep}");
}

#[test]
fn fit_rejects_bad_data() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "f.cfg", "preset = coherent-backscatter\n");
    let empty = write(&dir, "empty.csv", "x,y\n");
    let out = qscatter(&["fit", "--config", s(&cfg), "--data", s(&empty)]);
    assert_eq!(out.status.code(), Some(2));

    let missing = dir.path().join("nope.csv");
    let out = qscatter(&["fit", "--config", s(&cfg), "--data", s(&missing)]);
    assert_eq!(out.status.code(), Some(1));

    let scan_cfg = write(
        &dir,
        "s.cfg",
        "preset = one-photon-backscatter\nscan = frequency\n",
    );
    let data = dir.path().join("one.json");
    assert!(qscatter(&[
        "scan",
        "--config",
        s(&scan_cfg),
        "--format",
        "json",
        "--out",
        s(&data)
    ])
    .status
    .success());
    let out = qscatter(&["fit", "--config", s(&cfg), "--data", s(&data)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_validates_quadrature_and_handles_zero_susceptibility() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "o.cfg",
        "preset = one-photon-backscatter\nn_theta = 4\n",
    );
    let out = qscatter(&["oracle", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_theta"));

    let cfg = write(
        &dir,
        "z.cfg",
        "preset = one-photon-backscatter\nlambda = 0,0,0,0,0,0\nwidths = 0.02\n",
    );
    let out = qscatter(&["oracle", "--config", s(&cfg), "--format", "csv"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(std::str::from_utf8(&out.stdout).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1..], &[0.0, 0.0, 0.0]);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.cfg",
        "preset = entangled\nscan = frequency\nnoise = 0.02\n",
    );
    let run = |threads: &str| {
        let out = qscatter(&[
            "scan",
            "--config",
            s(&cfg),
            "--seed",
            "3",
            "--threads",
            threads,
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("3"));

    let data = write(&dir, "d.csv", std::str::from_utf8(&run("1")).unwrap());
    let fit_cfg = write(&dir, "f.cfg", "preset = entangled\n");
    let fit = |threads: &str| {
        qscatter(&[
            "fit",
            "--config",
            s(&fit_cfg),
            "--data",
            s(&data),
            "--threads",
            threads,
        ])
        .stdout
    };
    assert_eq!(fit("1"), fit("4"));
}
