use std::path::PathBuf;
use std::process::{Command, Output};

use persuade::measures::Distribution;
use persuade::payoffs::Payoff;
use serde_json::Value;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuade")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn read(path: &PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn crater_check_on_s_shape_passes() {
    let out = run(&["check-crater", &fixture("sshape.json")]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn crater_check_on_sin_fit_reports_a_witness() {
    let out = run(&["check-crater", &fixture("sinfit.json")]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("\"X\""));
    assert_eq!(code(&run(&["check-crater", &fixture("sinfit_compliant.json")])), 0);
}

#[test]
fn olc_failure_comes_with_a_chord_witness() {
    let path = scratch("olc.json");
    let out = run(&["check-olc", &fixture("usq.json"), &fixture("ulin.json"), "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let v = read(&path);
    assert_eq!(v["holds"], Value::Bool(false));
    let w = &v["witness"];
    for key in ["x", "z", "alpha", "strict"] {
        assert!(!w[key].is_null(), "missing {key}");
    }
    assert_eq!(code(&run(&["check-olc", &fixture("ulin.json"), &fixture("usq.json")])), 0);
}

#[test]
fn regularity() {
    assert_eq!(code(&run(&["check-regular", &fixture("sshape.json")])), 0);
    let out = run(&["check-regular", &fixture("step.json")]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("Discontinuity"));
}

#[test]
fn solve_writes_report_and_plot_data() {
    let (json, csv) = (scratch("solve.json"), scratch("solve.csv"));
    let out = run(&[
        "solve",
        &fixture("sshape.json"),
        &fixture("uniform.json"),
        "--grid",
        "101",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read(&json);
    assert!(r["gap"].as_f64().unwrap().abs() < 1e-8);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,F0cdf,Fcdf,C_F0,C_F,u,p"));
    assert_eq!(lines.count(), 101);
    // the emitted optimizer re-ingests to identical values
    let opt: Distribution = serde_json::from_value(r["optimizer"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&opt).unwrap(), r["optimizer"]);
}

#[test]
fn payload_round_trip_is_bit_identical() {
    let text = std::fs::read_to_string(fixture("sinfit.json")).unwrap();
    let u: Payoff = serde_json::from_str(&text).unwrap();
    let again: Payoff = serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
    assert_eq!(u, again);
}

#[test]
fn step_payoff_binary_value() {
    let path = scratch("binary.json");
    let out = run(&["binary", &fixture("step.json"), "--mu", "0.3", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!((read(&path)["value"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    // the grid solver agrees on the matching two-point prior
    let out = run(&["solve", &fixture("step.json"), &fixture("binary_03.json"), "--grid", "11"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("value 0.600000000000"));
}

#[test]
fn certificates() {
    let good = run(&["certify", &fixture("concave.json"), &fixture("uniform.json"), &fixture("point_half.json"), "--grid", "101"]);
    assert_eq!(code(&good), 0);
    let bad = run(&["certify", &fixture("concave.json"), &fixture("uniform.json"), &fixture("uniform.json"), "--grid", "101"]);
    assert_eq!(code(&bad), 1);
    // a candidate that is not a contraction of the prior is a usage error
    let infeasible = run(&["certify", &fixture("concave.json"), &fixture("point_half.json"), &fixture("uniform.json")]);
    assert_eq!(code(&infeasible), 2);
}

#[test]
fn compare_linear_with_convex() {
    let path = scratch("compare.json");
    let out = run(&[
        "compare",
        &fixture("ulin.json"),
        &fixture("usq.json"),
        &fixture("uniform.json"),
        "--grid",
        "41",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = read(&path);
    assert_eq!(v["lower"], Value::Bool(true));
    assert_eq!(v["strictly_higher"], Value::Bool(false));
}

#[test]
fn crater_counterexample_pipeline() {
    let (json, csv) = (scratch("cx.json"), scratch("cx.csv"));
    let out = run(&["counterexample", &fixture("sinfit.json"), "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let v = read(&json);
    for key in ["prior", "v", "optimizer"] {
        assert!(v["counterexample"][key].is_object(), "missing {key}");
    }
    assert_eq!(v["lemma5"]["pass"], Value::Bool(true));
    let header = std::fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "m,u,v,p,F0density,Fcdf");
    // nothing to construct when the property holds
    assert_eq!(code(&run(&["counterexample", &fixture("sshape.json")])), 1);
}

#[test]
fn two_point_counterexample() {
    let path = scratch("t1.json");
    let out = run(&["counterexample", &fixture("usq.json"), &fixture("ulin.json"), "--grid", "101", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(read(&path)["verdict"]["strictly_higher"], Value::Bool(true));
    assert_eq!(code(&run(&["counterexample", &fixture("ulin.json"), &fixture("usq.json")])), 1);
}

#[test]
fn experiment_batch() {
    let (json, csv) = (scratch("exp.json"), scratch("exp.csv"));
    let out = run(&[
        "experiment",
        "--kind",
        "prop1",
        "--count",
        "6",
        "--seed",
        "4",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert_eq!(read(&json)["passed"], Value::from(6));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);
    assert_eq!(code(&run(&["oracle", "--kind", "lemma4", "--count", "3"])), 0);
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["check-crater", &fixture("broken.json")])), 2);
    assert_eq!(code(&run(&["check-crater", "/nonexistent/u.json"])), 2);
    assert_eq!(code(&run(&["solve", &fixture("sshape.json"), &fixture("uniform.json"), "--grid", "2"])), 2);
    assert_eq!(code(&run(&["experiment", "--kind", "thm3"])), 2);
    assert_eq!(code(&run(&["binary", &fixture("sshape.json"), "--mu", "1.5"])), 2);
}
