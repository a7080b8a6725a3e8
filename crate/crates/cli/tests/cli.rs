use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cournot(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cournot"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two orange firms with a = 2 and a = 2.5 at z = 8.
const ORANGE_PAIR: &str = r#"{
    "version": 1,
    "economy": { "A": 10, "b": 1, "c": 1, "d": 1, "K_ex": 0 },
    "firms": [ { "alpha_sq": 0.5 }, { "alpha_sq": 0.4 } ]
}"#;

#[test]
fn solve_two_orange_firms() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "pair.json", ORANGE_PAIR);
    let out = dir.path().join("solve.csv");
    let run = cournot(&["solve"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));

    let summary = read_json(&dir.path().join("solve.json"));
    let q = summary["aggregates"]["quantity"].as_f64().unwrap();
    let k = summary["aggregates"]["carbon"].as_f64().unwrap();
    assert!((q - 16.0 / 3.0).abs() < 1e-12, "Q = {q}");
    assert!((k - 1.5).abs() < 1e-12, "K = {k}");

    let mut reader = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["firm_id", "alpha_sq", "beta", "a", "color", "q", "r", "k"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(&row[4], "orange");
        let q: f64 = row[5].parse().unwrap();
        assert!((q - 8.0 / 3.0).abs() < 1e-12);
    }
    // k = a − K for orange firms.
    let k1: f64 = rows[1][7].parse().unwrap();
    assert!((k1 - 1.0).abs() < 1e-12);
}

#[test]
fn solve_json_format_writes_one_file() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "pair.json", ORANGE_PAIR);
    let out = dir.path().join("result.out");
    let run = cournot(&["solve", "--format", "json"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    let summary = read_json(&out);
    assert_eq!(summary["firms"].as_array().unwrap().len(), 2);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
}

fn map_config(a: f64, c: f64, d: f64, hi: f64) -> String {
    format!(
        r#"{{
    "version": 1,
    "economy": {{ "A": {a}, "b": 1, "c": {c}, "d": {d} }},
    "two_firm_map": {{ "a1_min": 0, "a1_max": {hi}, "a2_min": 0, "a2_max": {hi},
                      "a1_points": 61, "a2_points": 61 }}
}}"#
    )
}

fn regimes(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap()[2].to_string())
        .collect()
}

#[test]
fn two_firm_map_has_no_white_red_when_z_exceeds_d() {
    let dir = TempDir::new().unwrap();
    // z = 10 > d = 5.
    let config = write_config(&dir, "map.json", &map_config(16.0, 1.0, 5.0, 12.0));
    let out = dir.path().join("map.csv");
    let run = cournot(&["two-firm-map"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    let names = regimes(&out);
    assert_eq!(names.len(), 61 * 61);
    assert!(!names.iter().any(|r| r == "white-red" || r == "red-white"));
    assert!(names.iter().any(|r| r == "red-red"));
}

#[test]
fn two_firm_map_has_white_red_when_d_exceeds_z() {
    let dir = TempDir::new().unwrap();
    // z = 3 < d = 12.
    let config = write_config(&dir, "map.json", &map_config(16.0, 1.0, 12.0, 12.0));
    let out = dir.path().join("map.csv");
    let run = cournot(&["two-firm-map"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(regimes(&out).iter().any(|r| r == "white-red"));
}

#[test]
fn negative_green_premium_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "bad.json", &ORANGE_PAIR.replace("\"d\": 1", "\"d\": -1"));
    let out = dir.path().join("solve.csv");
    let run = cournot(&["solve"], &config, &out);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("economy.d"), "{}", stderr(&run));
    assert!(!out.exists());
    assert!(!dir.path().join("solve.json").exists());
}

#[test]
fn unknown_keys_and_versions_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("solve.csv");
    let typo = write_config(&dir, "typo.json", &ORANGE_PAIR.replace("\"K_ex\"", "\"K_exo\""));
    let run = cournot(&["solve"], &typo, &out);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("K_exo"));

    let old = write_config(&dir, "old.json", &ORANGE_PAIR.replace("\"version\": 1", "\"version\": 0"));
    let run = cournot(&["solve"], &old, &out);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("version"));
    assert!(!out.exists());
}

fn random_config(count: usize) -> String {
    format!(
        r#"{{
    "version": 1,
    "economy": {{ "A": 12, "b": 0.8, "c": 1.5, "d": 2, "K_ex": 0.3 }},
    "random_firms": {{ "count": {count} }}
}}"#
    )
}

#[test]
fn output_is_deterministic_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "random.json", &random_config(6));
    let mut bytes = Vec::new();
    for (i, seed) in ["11", "11", "12"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}.csv"));
        let run = cournot(&["solve", "--seed", seed], &config, &out);
        assert!(run.status.success(), "{}", stderr(&run));
        bytes.push(fs::read(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    assert_ne!(bytes[0], bytes[2]);

    let map = write_config(&dir, "map.json", &map_config(12.0, 1.0, 5.0, 9.0));
    let first = dir.path().join("map1.csv");
    let second = dir.path().join("map2.csv");
    assert!(cournot(&["two-firm-map"], &map, &first).status.success());
    assert!(cournot(&["two-firm-map"], &map, &second).status.success());
    assert_eq!(fs::read(first).unwrap(), fs::read(second).unwrap());
}

#[test]
fn solve_then_verify_round_trips() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "random.json", &random_config(7));
    for seed in 0..8u64 {
        let seed = seed.to_string();
        let solved = dir.path().join(format!("solve{seed}.csv"));
        let run = cournot(&["solve", "--seed", &seed], &config, &solved);
        assert!(run.status.success(), "{}", stderr(&run));
        let report = dir.path().join(format!("verify{seed}.json"));
        let profile = dir.path().join(format!("solve{seed}.json"));
        let run = cournot(
            &["verify", "--seed", &seed, "--profile", profile.to_str().unwrap()],
            &config,
            &report,
        );
        assert!(run.status.success(), "{}", stderr(&run));
        let v = read_json(&report);
        assert!(v["max_violation"].as_f64().unwrap() < 1e-10, "{v}");
        assert_eq!(v["passed"], Value::Bool(true));
    }
}

#[test]
fn verify_rejects_a_perturbed_profile() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "pair.json", ORANGE_PAIR);
    let solved = dir.path().join("solve.json");
    assert!(cournot(&["solve", "--format", "json"], &config, &solved).status.success());
    let mut profile = read_json(&solved);
    profile["firms"][0]["q"] = Value::from(2.7);
    fs::write(&solved, profile.to_string()).unwrap();
    let report = dir.path().join("verify.json");
    let run = cournot(&["verify", "--profile", solved.to_str().unwrap()], &config, &report);
    assert_eq!(run.status.code(), Some(2));
    assert_eq!(read_json(&report)["passed"], Value::Bool(false));
}

#[test]
fn rising_coefficients_violate_the_long_run_hypothesis() {
    let dir = TempDir::new().unwrap();
    // Beliefs start below their limits, so early coefficients exceed the
    // declared long-run maximum.
    let body = r#"{
        "version": 1,
        "economy": { "A": 10, "b": 1, "c": 1, "d": 1 },
        "firms": [ { "alpha_sq": 0.5 }, { "alpha_sq": 0.4 } ],
        "dynamics": { "rounds": 5, "limit": "green",
                      "schedule": { "kind": "geometric", "start": [0.2, 0.4], "ratio": 0.5 } }
    }"#;
    let config = write_config(&dir, "dyn.json", body);
    let out = dir.path().join("trace.csv");
    let run = cournot(&["dynamics"], &config, &out);
    assert_eq!(run.status.code(), Some(3), "{}", stderr(&run));
    assert!(stderr(&run).contains("round 1"), "{}", stderr(&run));
    assert!(!out.exists());
}

#[test]
fn dynamics_trace_approaches_the_largest_coefficient() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "version": 1,
        "economy": { "A": 10, "b": 1, "c": 1, "d": 1 },
        "firms": [ { "alpha_sq": 0.5 }, { "alpha_sq": 0.4 } ],
        "dynamics": { "rounds": 40, "alpha_true": 0.5, "limit": "green" }
    }"#;
    let config = write_config(&dir, "dyn.json", body);
    let out = dir.path().join("trace.csv");
    let run = cournot(&["dynamics"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    let rows: Vec<csv::StringRecord> =
        csv::Reader::from_path(&out).unwrap().records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 40);
    let last: f64 = rows[39][1].parse().unwrap();
    assert!((last - 2.5).abs() < 1e-9 && last <= 2.5);
    let limit = read_json(&dir.path().join("trace.json"));
    assert!(limit["limit"]["verdict"]["Converged"].is_object(), "{limit}");
}

#[test]
fn missing_root_is_a_solver_error() {
    let dir = TempDir::new().unwrap();
    // The CRRA root for these numbers lies near 0.07, outside the bracket.
    let body = r#"{
        "version": 1,
        "economy": { "A": 10, "b": 1, "c": 1, "d": 1 },
        "utility": { "function": { "kind": "crra", "gamma": 0.5 }, "n": 2, "bracket": [1, 2] }
    }"#;
    let config = write_config(&dir, "u.json", body);
    let out = dir.path().join("u.json.out");
    let run = cournot(&["utility"], &config, &out);
    assert_eq!(run.status.code(), Some(2), "{}", stderr(&run));
    assert!(!out.exists());
}

#[test]
fn utility_matches_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "version": 1,
        "economy": { "A": 10, "b": 1, "c": 1, "d": 1 },
        "utility": { "function": { "kind": "log" }, "n": 3 }
    }"#;
    let config = write_config(&dir, "u.json", body);
    let out = dir.path().join("solution.json");
    let run = cournot(&["utility"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    let v = read_json(&out);
    // Log utility: q₀ = (n − 1)/((c + d) n²).
    let q = v["solution"]["quantity"].as_f64().unwrap();
    assert!((q - 2.0 / 18.0).abs() < 1e-12, "{v}");
    assert!((v["closed_form"].as_f64().unwrap() - q).abs() < 1e-12);
}

#[test]
fn statics_csv_has_a_row_per_partial() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, "pair.json", ORANGE_PAIR);
    let out = dir.path().join("statics.csv");
    let run = cournot(&["statics"], &config, &out);
    assert!(run.status.success(), "{}", stderr(&run));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    assert_eq!(&reader.headers().unwrap()[0], "quantity");
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert!(!rows.is_empty());
    for row in &rows {
        if let (Ok(abs), Ok(rel)) = (row[4].parse::<f64>(), row[5].parse::<f64>()) {
            assert!(abs < 1e-8 || rel < 1e-4, "{row:?}");
        }
    }
    // Raising firm 0's belief lowers total carbon.
    let carbon = rows.iter().find(|r| &r[0] == "K" && &r[1] == "alpha_sq[0]").unwrap();
    assert_eq!(&carbon[7], "decreasing");
}
