use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdd-pdmp"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Numeric columns of a CSV file, header dropped.
fn columns(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let width = lines.next().unwrap().split(',').count();
    let mut cols = vec![Vec::new(); width];
    for line in lines {
        for (c, v) in line.split(',').enumerate() {
            cols[c].push(v.parse::<f64>().unwrap_or(f64::NAN));
        }
    }
    cols
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const ONE_STATE: &str = r#"{"k": 1, "pi": [1.0], "Q": [[1.0]], "lambda": [1.5], "jump_laws": [{"alpha": 2.0, "beta": 8.0}]}"#;

fn table1() -> String {
    fixture("table1_model.json").to_str().unwrap().to_owned()
}

fn synthetic() -> String {
    fixture("synthetic_prices.csv").to_str().unwrap().to_owned()
}

#[test]
fn records_on_fixture_are_increasing() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["records", "--input", &synthetic(), "--output", "events.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert!(text.starts_with("t,inter_arrival,prev_record,new_record,rho,provisional"));
    let cols = columns(&dir.path().join("events.csv"));
    assert!(cols[3].len() > 100);
    assert!(cols[3].windows(2).all(|w| w[1] > w[0]));
    assert!(cols[4].iter().all(|&r| r > 0.0 && r < 1.0));
}

#[test]
fn monotone_prices_give_empty_events_and_a_warning() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "up.csv", "date,close\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n");
    let out = run(dir.path(), &["records", "--input", &input, "--output", "events.csv"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    let text = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn bad_close_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("date,close\n");
    for i in 1..=5 {
        text.push_str(&format!("{i},{}\n", 100 - i));
    }
    text.push_str("6,abc\n");
    let input = write(dir.path(), "bad.csv", &text);
    let out = run(dir.path(), &["records", "--input", &input, "--output", "events.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 7"), "{}", stderr(&out));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["records", "--input", "nope.csv", "--output", "events.csv"]);
    assert_eq!(code(&out), 2);
    let out = run(dir.path(), &["records", "--output", "events.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_rejects_unit_initial_record() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--model", &table1(), "--output", "e.csv", "--r0", "1.0"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn simulate_with_two_paths() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate", "--model", &table1(), "--output", "e.csv", "-n", "2", "--paths", "p.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cols = columns(&dir.path().join("e.csv"));
    assert_eq!(cols[0].len(), 101);
    let paths = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(paths.starts_with("path_id,T_n,state,record"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |o: &'static str| ["simulate", "--model", &table1(), "--output", o, "-n", "500", "--seed", "9"].map(String::from);
    let a = args("a.csv");
    let b = args("b.csv");
    assert_eq!(code(&run(dir.path(), &a.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    assert_eq!(code(&run(dir.path(), &b.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());

    let out = run(dir.path(), &["pipeline", "--input", &synthetic(), "--out-dir", "p1", "-n", "200"]);
    assert_eq!(code(&out), 0);
    run(dir.path(), &["pipeline", "--input", &synthetic(), "--out-dir", "p2", "-n", "200"]);
    for f in ["events.csv", "fit.json", "ensemble.csv"] {
        assert_eq!(fs::read(dir.path().join("p1").join(f)).unwrap(), fs::read(dir.path().join("p2").join(f)).unwrap());
    }
}

#[test]
fn simulate_agrees_with_moments() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["simulate", "--model", &table1(), "--output", "sim.csv"])), 0);
    assert_eq!(code(&run(dir.path(), &["moments", "--model", &table1(), "--output", "mom.csv"])), 0);
    let sim = columns(&dir.path().join("sim.csv"));
    let mom = columns(&dir.path().join("mom.csv"));
    assert_eq!(sim[0], mom[0]);
    for i in 0..sim[0].len() {
        assert!((sim[1][i] - mom[1][i]).abs() < 0.01, "mean at t = {}", sim[0][i]);
        assert!((sim[2][i] - mom[2][i]).abs() < 0.01, "var at t = {}", sim[0][i]);
    }
}

#[test]
fn moments_reference_values() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["moments", "--model", &table1(), "--output", "m.csv", "--r0", "0.2", "--mean-curve", "mc.csv", "--variance-curve", "vc.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = columns(&dir.path().join("m.csv"));
    assert_eq!((m[0][0], m[1][0], m[2][0]), (0.0, 0.2, 0.0));
    let mc = fs::read_to_string(dir.path().join("mc.csv")).unwrap();
    assert!(mc.starts_with("t,mixed,state_1,state_2"));

    let out = run(dir.path(), &["moments", "--model", &table1(), "--output", "m0.csv", "--horizon", "30"]);
    assert_eq!(code(&out), 0);
    let m = columns(&dir.path().join("m0.csv"));
    assert!((m[1].last().unwrap() - 0.9594056060433165).abs() < 1e-9);
}

#[test]
fn one_state_moments_match_the_exponential_law() {
    let dir = TempDir::new().unwrap();
    let model = write(dir.path(), "one.json", ONE_STATE);
    let out = run(dir.path(), &["moments", "--model", &model, "--output", "m.csv", "--r0", "0.1", "--variance-curve", "v.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = columns(&dir.path().join("m.csv"));
    for (t, mean) in m[0].iter().zip(&m[1]) {
        let expected = 1.0 - 0.9 * (-1.5 * 0.2 * t).exp();
        assert!((mean - expected).abs() < 1e-9);
    }
    let v = columns(&dir.path().join("v.csv"));
    assert_eq!(v.len(), 3);
    assert!(v[1].iter().zip(&v[2]).all(|(var, bound)| var <= &(bound + 1e-9)));
}

#[test]
fn coarse_rk4_step_fails_the_cross_check() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["moments", "--model", &table1(), "--output", "m.csv", "--rk4-step", "0.5"]);
    assert_eq!(code(&out), 5);
    assert!(dir.path().join("m.csv").exists());
}

fn events_of(dir: &Path) -> String {
    let out = run(dir, &["records", "--input", &synthetic(), "--output", "events.csv"]);
    assert_eq!(code(&out), 0);
    "events.csv".into()
}

#[test]
fn fit_one_state() {
    let dir = TempDir::new().unwrap();
    let events = events_of(dir.path());
    let out = run(dir.path(), &["fit", "--events", &events, "--output", "fit.json", "-k", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["k"], 1);
    assert_eq!(fit["Q"], serde_json::json!([[1.0]]));
    assert!(fit["labels"].as_array().unwrap().iter().all(|l| l == 1));
}

#[test]
fn fit_needs_enough_events() {
    let dir = TempDir::new().unwrap();
    let input = write(dir.path(), "p.csv", "date,close\n0,100\n1,90\n2,95\n3,80\n4,85\n");
    assert_eq!(code(&run(dir.path(), &["records", "--input", &input, "--output", "e.csv"])), 0);
    let out = run(dir.path(), &["fit", "--events", "e.csv", "--output", "fit.json"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn unconverged_fit_still_writes_output() {
    let dir = TempDir::new().unwrap();
    let events = events_of(dir.path());
    let out = run(dir.path(), &["fit", "--events", &events, "--output", "fit.json", "--max-iter", "1"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["converged"], false);
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        &format!(r#"{{"model": {:?}, "output": "cfg.csv", "n_paths": 50, "horizon": 10.0}}"#, table1()),
    );
    let out = run(dir.path(), &["--config", &cfg, "simulate"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(*columns(&dir.path().join("cfg.csv"))[0].last().unwrap(), 10.0);

    let out = run(dir.path(), &["--config", &cfg, "simulate", "--horizon", "20", "--output", "flag.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(*columns(&dir.path().join("flag.csv"))[0].last().unwrap(), 20.0);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"horizn": 10}"#);
    let out = run(dir.path(), &["--config", &cfg, "simulate", "--model", &table1(), "--output", "x.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn pipeline_writes_all_outputs() {
    let dir = TempDir::new().unwrap();
    let start = Instant::now();
    let out = run(dir.path(), &["pipeline", "--input", &synthetic(), "--out-dir", "out"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(start.elapsed() < Duration::from_secs(60));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/fit.json")).unwrap()).unwrap();
    for key in ["k", "pi", "Q", "lambda", "jump_laws", "labels", "loglik_trace", "converged", "iterations"] {
        assert!(fit.get(key).is_some(), "missing {key}");
    }
    let trace: Vec<f64> = fit["loglik_trace"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(trace.windows(2).all(|w| w[1] >= w[0]));
    // the fit file is itself a valid model
    let out = run(dir.path(), &["moments", "--model", "out/fit.json", "--output", "m.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("out/ensemble.csv").exists());
}
