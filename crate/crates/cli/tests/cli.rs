use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_enclosure"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn exec(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn layered_run_reports_obstacle_with_expected_rate() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("run")
            .arg(scenario("layered"))
            .arg("-o")
            .arg(dir.path())
            .arg("--certificates"),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v = json(&dir.path().join("verdict_elliptic.json"));
    assert_eq!(v["class"], "Obstacle_AI");
    assert_eq!(v["sign"], -1);
    let rate = v["rate"].as_f64().unwrap();
    assert!((rate + 2.9).abs() <= 0.05 * 2.9, "{rate}");
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 2.0 * rate).abs() <= 1e-15 * slope.abs());
    assert_eq!(v["certificates_hold"], true);
    assert_eq!(v["M0"], 2.0);
    assert!(v["dist_db"].as_f64().is_some());
}

#[test]
fn every_artifact_embeds_hash_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("-q")
            .arg("run")
            .arg(scenario("layered"))
            .args(["--pipeline", "both", "-o"])
            .arg(dir.path()),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let hash = json(&dir.path().join("verdict_elliptic.json"))["scenario_hash"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(hash.len(), 64);
    let version = env!("CARGO_PKG_VERSION");
    for f in [
        "series_elliptic.csv",
        "series_reference.csv",
        "verdict_elliptic.json",
        "verdict_reference.json",
        "summary.txt",
        "manifest.json",
    ] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.contains(&hash), "{f} lacks the hash");
        assert!(text.contains(version), "{f} lacks the version");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..2 {
        let o = exec(
            bin()
                .current_dir(dir.path())
                .arg("-q")
                .arg("run")
                .arg(scenario("two_layer"))
                .args(["--pipeline", "both", "-o", "a"]),
        );
        assert!(o.status.success());
        fs::rename(dir.path().join("a"), dir.path().join(format!("run{k}"))).unwrap();
    }
    for f in [
        "series_elliptic.csv",
        "series_reference.csv",
        "verdict_elliptic.json",
        "verdict_reference.json",
        "summary.txt",
        "manifest.json",
    ] {
        let a = fs::read(dir.path().join("run0").join(f)).unwrap();
        let b = fs::read(dir.path().join("run1").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn empty_scenario_is_classified_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("-q")
            .arg("run")
            .arg(scenario("layered_empty"))
            .args(["--pipeline", "both", "-o"])
            .arg(dir.path()),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for p in ["elliptic", "reference"] {
        let v = json(&dir.path().join(format!("verdict_{p}.json")));
        assert_eq!(v["class"], "Empty", "{p}");
        assert_eq!(v["distance_band"], Value::Null);
    }
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[grid]\ndimension = 1\n").unwrap();
    let o = exec(
        bin()
            .arg("run")
            .arg(&bad)
            .arg("-o")
            .arg(dir.path().join("o")),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("parse error"));
    let o = exec(bin().arg("info").arg(dir.path().join("missing.toml")));
    assert_eq!(o.status.code(), Some(1));
    let text = fs::read_to_string(scenario("layered"))
        .unwrap()
        .replace("eta = 0.1", "eta = -0.1");
    fs::write(&bad, text).unwrap();
    let o = exec(bin().arg("info").arg(&bad));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid scenario"));
}

#[test]
fn numerical_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let few = dir.path().join("few.toml");
    fs::write(
        &few,
        fs::read_to_string(scenario("empty_constant"))
            .unwrap()
            .replace("tau_count = 17", "tau_count = 3"),
    )
    .unwrap();
    let o = exec(
        bin()
            .arg("run")
            .arg(&few)
            .arg("-o")
            .arg(dir.path().join("o")),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("too few"));
}

#[test]
fn fast_validation_passes_quickly_on_constant_medium() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = exec(
        bin()
            .arg("-q")
            .arg("validate")
            .arg(scenario("empty_constant"))
            .arg("-o")
            .arg(dir.path()),
    );
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(
        out.lines()
            .all(|l| l.starts_with("PASS") || l.starts_with("SKIP")),
        "{out}"
    );
    assert!(out.contains("transform_residual"));
    let v = json(&dir.path().join("validation.json"));
    assert_eq!(v["level"], "fast");
    assert!(v["scenario_hash"].as_str().is_some());
}

#[test]
fn corrupted_w_fails_validation_naming_the_residual() {
    let o = exec(
        bin()
            .arg("validate")
            .arg(scenario("empty_constant"))
            .arg("--corrupt-w"),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("transform_residual"), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out
        .lines()
        .any(|l| l.starts_with("FAIL transform_residual")));
}

#[test]
fn full_validation_reports_second_order() {
    let o = exec(
        bin()
            .arg("-q")
            .arg("validate")
            .arg(scenario("two_layer"))
            .args(["--level", "full"]),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    for name in [
        "lower_identity_order",
        "upper_identity_order",
        "transform_residual_order",
    ] {
        let line = out.lines().find(|l| l.contains(name)).unwrap();
        let order: f64 = line.split_whitespace().nth(3).unwrap().parse().unwrap();
        assert!((1.5..=2.2).contains(&order), "{line}");
    }
}

fn batch_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn time_sweep_switches_to_obstacle_after_twice_the_travel_time() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("-q")
            .arg("sweep")
            .arg(scenario("layered"))
            .args([
                "--parameter",
                "T",
                "--values",
                "4,5.8,7,9",
                "--jobs",
                "3",
                "-o",
            ])
            .arg(dir.path()),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = batch_rows(&dir.path().join("batch.csv"));
    let classes: Vec<&str> = rows.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(classes, ["Empty", "Empty", "Obstacle_AI", "Obstacle_AI"]);
    assert!(dir
        .path()
        .join("002_T_7")
        .join("verdict_elliptic.json")
        .exists());
}

#[test]
fn contrast_sweep_flips_the_sign() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("-q")
            .arg("sweep")
            .arg(scenario("layered"))
            .args(["--parameter", "contrast", "--values", "-0.5,0.5", "-o"])
            .arg(dir.path()),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = batch_rows(&dir.path().join("batch.csv"));
    assert_eq!(
        (rows[0][4].as_str(), rows[0][5].as_str()),
        ("Obstacle_AII", "1")
    );
    assert_eq!(
        (rows[1][4].as_str(), rows[1][5].as_str()),
        ("Obstacle_AI", "-1")
    );
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("-q")
            .arg("sweep")
            .arg(scenario("two_layer"))
            .args(["--parameter", "T", "--values", "6", "-o"])
            .arg(dir.path().join("s")),
    );
    assert!(o.status.success());
    let o = exec(
        bin()
            .arg("-q")
            .arg("run")
            .arg(scenario("two_layer"))
            .arg("-o")
            .arg(dir.path().join("r")),
    );
    assert!(o.status.success());
    let a = fs::read(dir.path().join("s/000_T_6/series_elliptic.csv")).unwrap();
    let b = fs::read(dir.path().join("r/series_elliptic.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sweep_isolates_failures_and_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    for jobs in ["1", "3"] {
        let o = exec(
            bin()
                .arg("-q")
                .arg("sweep")
                .arg(scenario("empty_constant"))
                .args([
                    "--parameter",
                    "T",
                    "--values",
                    "3,-1,4",
                    "--jobs",
                    jobs,
                    "-o",
                ])
                .arg(dir.path().join(jobs)),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("1/batch.csv")).unwrap();
    let b = fs::read(dir.path().join("3/batch.csv")).unwrap();
    assert_eq!(a, b);
    let rows = batch_rows(&dir.path().join("1/batch.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][2], "failed");
    assert_eq!((rows[0][2].as_str(), rows[2][2].as_str()), ("ok", "ok"));
    let summary = fs::read_to_string(dir.path().join("1/sweep_summary.txt")).unwrap();
    assert!(summary.contains("1 failed") && summary.contains("T = -1"));
}

#[test]
fn unknown_sweep_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(
        bin()
            .arg("sweep")
            .arg(scenario("layered"))
            .args(["--parameter", "speed", "--values", "1", "-o"])
            .arg(dir.path()),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn info_prints_derived_quantities() {
    let o = exec(bin().arg("info").arg(scenario("layered")));
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    for key in ["dist_DB", "dt (CFL)", "truncation radius", "time threshold"] {
        assert!(out.contains(key), "{out}");
    }
    let o = exec(bin().arg("info").arg(scenario("layered")).arg("--json"));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["dist_db"].as_f64().unwrap() - 2.4).abs() < 1e-12);
    assert!((v["time_threshold"].as_f64().unwrap() - 9.6).abs() < 1e-12);
}
