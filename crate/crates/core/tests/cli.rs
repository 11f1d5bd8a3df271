use std::fs;
use std::path::Path;

use pluripot::cli::run;

fn invoke(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["pluripot", "--out", out.to_str().unwrap(), "--no-timing"];
    argv.extend_from_slice(args);
    run(argv)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn mesh_writes_points_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke(dir.path(), &["mesh", "--set", "square", "--degree", "3"]),
        0
    );
    let mut reader = csv::Reader::from_path(dir.path().join("mesh.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["x", "y"]);
    assert_eq!(reader.records().count(), 49);
    let summary = json(&dir.path().join("mesh.json"));
    assert_eq!(summary["cardinality"], 49);
    assert!((summary["constant"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn transfinite_square_is_calibrated() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke(
            dir.path(),
            &["transfinite", "--set", "square", "--degrees", "1:1:6"]
        ),
        0
    );
    let report = json(&dir.path().join("transfinite.json"));
    let raw = report["raw"].as_array().unwrap();
    assert_eq!(raw.len(), 6);
    for v in raw {
        assert!((v.as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
    assert!(report["wall_time_s"].is_null());
}

#[test]
fn equilibrium_density_on_square() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke(
        dir.path(),
        &[
            "equilibrium",
            "--set",
            "square",
            "--degree",
            "1",
            "--grid",
            "x:-1:1:21,y:-1:1:21",
            "--normalize",
        ],
    );
    assert_eq!(code, 0);
    let mut reader = csv::Reader::from_path(dir.path().join("density.csv")).unwrap();
    let mut mass = 0.0;
    let mut rows = 0;
    for record in reader.records() {
        let r = record.unwrap();
        let raw: f64 = r[3].parse().unwrap();
        assert!(raw >= -1e-10);
        mass += r[5].parse::<f64>().unwrap();
        rows += 1;
    }
    assert_eq!(rows, 441);
    let cell = (2.0 / 20.0) * (2.0 / 20.0);
    assert!((mass * cell - 1.0).abs() < 1e-12);
}

#[test]
fn complex_grid_for_density_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = invoke(
        dir.path(),
        &[
            "equilibrium",
            "--set",
            "disk",
            "--degree",
            "2",
            "--imag-shift",
            "0.1,0",
        ],
    );
    assert_eq!(code, 2);
    assert!(!dir.path().join("density.csv").exists());
}

#[test]
fn malformed_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke(dir.path(), &["mesh", "--set", "torus", "--degree", "2"]),
        2
    );
    assert_eq!(
        invoke(
            dir.path(),
            &["transfinite", "--set", "disk", "--degrees", "8:2:4"]
        ),
        2
    );
    assert_eq!(
        invoke(
            dir.path(),
            &["extremal", "--set", "disk", "--degrees", "4", "--bogus"]
        ),
        2
    );
}

#[test]
fn outputs_are_deterministic_without_timing() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let code = invoke(
                dir.path(),
                &[
                    "extremal",
                    "--set",
                    "disk",
                    "--degrees",
                    "4:2:10",
                    "--grid",
                    "x:-2:2:9,y:-2:2:9",
                    "--errors",
                    "--accelerate",
                ],
            );
            assert_eq!(code, 0);
            let csv = fs::read(dir.path().join("values.csv")).unwrap();
            let report = fs::read(dir.path().join("extremal.json")).unwrap();
            (csv, report)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn fekete_points_include_square_corners() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        invoke(
            dir.path(),
            &["fekete", "--set", "square-cl", "--degree", "2"]
        ),
        0
    );
    let mut reader = csv::Reader::from_path(dir.path().join("fekete.csv")).unwrap();
    let points: Vec<(f64, f64)> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].parse().unwrap())
        })
        .collect();
    assert_eq!(points.len(), 6);
    for corner in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        assert!(points.contains(&corner));
    }
}
