use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn slicelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn slicelab_with_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicelab"))
        .args(args)
        .env("SLICELAB_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("record line is JSON"))
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `∫_{-1}^{1} exp(-x^2 / (2σ^2)) dx` by composite Simpson.
fn gaussian_interval(sigma: f64) -> f64 {
    let m = 20_000;
    let h = 2.0 / m as f64;
    let f = |x: f64| (-x * x / (2.0 * sigma * sigma)).exp();
    let mut s = f(-1.0) + f(1.0);
    for i in 1..m {
        let x = -1.0 + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

#[test]
fn volume_of_cross_polytope() {
    let out = slicelab(&["volume", "--n", "4", "--body", "lq(1)", "--level", "16"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &records(&out)[0];
    let v = r["outcome"]["value"].as_f64().unwrap();
    assert!((v - 2.0 / 3.0).abs() < 1e-5, "{v}");
    assert!((r["outcome"]["detail"]["closed_form"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn section_of_ball_is_lower_dimensional_ball() {
    let out = slicelab(&["section", "--n", "4", "--k", "1", "--body", "ball", "--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = records(&out)[0]["outcome"]["value"].as_f64().unwrap();
    assert!((v - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-9, "{v}");
}

#[test]
fn gaussian_measure_of_cube_is_separable() {
    let out = slicelab(&["measure", "--n", "3", "--body", "cube", "--measure", "gaussian(0.8)", "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let row: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "value").unwrap();
    let v: f64 = row[col].parse().unwrap();
    let expect = gaussian_interval(0.8).powi(3);
    assert!((v - expect).abs() < 1e-6 * expect, "{v} vs {expect}");
}

#[test]
fn records_carry_digest_and_seed_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    let out = slicelab(&[
        "verify",
        "--n",
        "4",
        "--k",
        "1,2",
        "--body",
        "cube; random_box(2)",
        "--measure",
        "even_poly(1)",
        "--formula",
        "unconditional",
        "--budget",
        "3x20",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    for (i, r) in lines.iter().enumerate() {
        assert_eq!(r["index"].as_u64().unwrap() as usize, i);
        assert_eq!(r["seed"].as_u64().unwrap(), 11);
        assert_eq!(r["digest"].as_str().unwrap().len(), 64);
        assert_eq!(r["outcome"]["passed"], Value::Bool(true));
    }
    let replayed = slicelab(&["replay", path.to_str().unwrap()]);
    assert!(replayed.status.success(), "{}", stderr(&replayed));
    let report = String::from_utf8(replayed.stdout).unwrap();
    assert_eq!(report.matches("REPRODUCED").count(), 4, "{report}");
}

#[test]
fn tampered_record_does_not_replay() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.jsonl");
    let out = slicelab(&["volume", "--n", "3", "--body", "cube", "--level", "8", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap().replace("\"level\":8", "\"level\":9");
    fs::write(&path, text).unwrap();
    let replayed = slicelab(&["replay", path.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&replayed.stdout).contains("MISMATCH"));
}

#[test]
fn failing_bound_exits_one() {
    let out = slicelab(&[
        "verify", "--n", "4", "--k", "1", "--body", "cube", "--formula", "general", "--c0", "0.001", "--budget", "2x10",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert_eq!(records(&out)[0]["outcome"]["passed"], Value::Bool(false));
}

#[test]
fn config_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep\nn = 4..5\nbody = ball\nlevel = lots\n").unwrap();
    let out = slicelab(&["volume", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("line 4") && msg.contains("`level`"), "{msg}");

    let out = slicelab(&["volume", "--n", "4", "--body", "ellipsoid(1, 2)"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`body`"));

    let out = slicelab(&["verify", "--n", "4", "--body", "cube", "--formula", "stability"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));

    let out = slicelab(&["volume", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_command_line_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "n = 3\nbody = cube; cross\nlevel = 6\nseed = 5\n").unwrap();
    let out = slicelab(&["volume", "--config", cfg.to_str().unwrap(), "--n", "4", "--set", "level=10"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rs = records(&out);
    assert_eq!(rs.len(), 2);
    assert_eq!(rs[0]["case"]["n"], 4);
    assert_eq!(rs[1]["case"]["level"], 10);
    assert_eq!(rs[1]["seed"], 5);
}

#[test]
fn output_is_independent_of_thread_count() {
    let args = [
        "maxsection", "--n", "4", "--k", "1", "--body", "cross; lq(3)", "--measure", "gaussian(0.7)", "--budget", "4x15",
    ];
    let one = slicelab_with_threads(&args, 1);
    let four = slicelab_with_threads(&args, 4);
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn sign_test_finds_negative_direction_and_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("grid.csv");
    let out = slicelab(&["ftest", "--n", "5", "--body", "lq(4)", "--resolution", "6", "--plot", plot.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &records(&out)[0];
    assert_eq!(r["outcome"]["detail"]["verdict"], "NEGATIVE_FOUND");
    let grid = fs::read_to_string(&plot).unwrap();
    assert!(grid.starts_with("index,theta_1,theta_2,theta_3,theta_4,theta_5,transform"));
    assert!(grid.lines().skip(1).any(|l| l.ends_with(|c: char| c.is_ascii_digit()) && l.contains(",-")));

    let out = slicelab(&["ftest", "--n", "3", "--body", "lq(4)", "--resolution", "6"]);
    assert_eq!(records(&out)[0]["outcome"]["detail"]["verdict"], "INCONCLUSIVE_NONNEGATIVE");
}

#[test]
fn table_follows_proportional_codimension() {
    let out = slicelab(&["table", "--n", "4..8", "--lambda", "0.5", "--c0", "1", "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let ks: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(ks, ["2", "3", "3", "4", "4"]);
}

#[test]
fn parseval_pair_of_revolution_bodies() {
    let out = slicelab(&[
        "parseval",
        "--n",
        "4",
        "--body",
        "revolution(q=4, kappa=0.1)",
        "--against",
        "revolution(q=3)",
        "--exponent",
        "1.5",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let gap = records(&out)[0]["outcome"]["value"].as_f64().unwrap();
    assert!(gap < 1e-3, "{gap}");
}

#[test]
fn counterexample_rejects_intersection_body() {
    let out = slicelab(&["counterexample", "--n", "5", "--body", "ball"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no negative direction"));
}
