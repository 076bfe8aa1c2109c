use std::io::Write as _;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn delaymid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaymid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(args: &[&str]) -> Value {
    let out = delaymid(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn classic_first_order() {
    let v = json_of(&["classic-mid", "--n", "1", "--m", "0", "--s0", "-2", "--tau", "1"]);
    assert_eq!(v["qp"]["a"][0], 1.0);
    assert_eq!(v["qp"]["b"][0], 0.135335283237);
    assert_eq!(v["multiplicity"], 2);
    assert_eq!(v["mode"], "classic");
}

#[test]
fn control_mid_with_either_variable_fixed() {
    let v = json_of(&["control-mid", "--n", "2", "--m", "1", "--a", "0,0", "--tau", "1"]);
    assert!((v["s0"].as_f64().unwrap() + 0.585786).abs() < 1e-6);
    let s0 = format!("{}", -(2.0 - 2f64.sqrt()));
    let v = json_of(&["control-mid", "--n", "2", "--m", "1", "--a", "0,0", "--s0", &s0]);
    assert!((v["qp"]["tau"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn control_mid_candidate_override() {
    let base = ["control-mid", "--n", "2", "--m", "1", "--a", "0,0", "--tau", "1"];
    let v = json_of(&base);
    let candidates = v["candidates"].as_array().unwrap().clone();
    assert_eq!(candidates.len(), 2);
    let mut args = base.to_vec();
    args.extend(["--candidate", "0"]);
    assert_eq!(json_of(&args)["s0"], candidates[0]);
    let mut args = base.to_vec();
    args.extend(["--window", "-1,0"]);
    assert_eq!(json_of(&args)["candidates"].as_array().unwrap().len(), 1);
}

#[test]
fn no_admissible_root_reports_the_equation() {
    let out = delaymid(&["control-mid", "--n", "2", "--m", "1", "--a", "0,0", "--s0", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error_name"], "NoAdmissibleRoot");
    let equation = v["details"]["compatibility_equation"].as_str().unwrap();
    assert!(equation.contains("s0 = 1"), "{equation}");
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["classic-mid", "--n", "1"],
        vec!["control-mid", "--n", "2", "--m", "1", "--a", "0,0", "--s0", "-1", "--tau", "1"],
        vec!["roots", "--a", "1,0", "--b", "0", "--tau", "1", "--rect", "1,0,0,1"],
        vec!["simulate", "--a", "1", "--b", "0", "--tau", "1", "--ic", "bogus:1", "--T", "1"],
        vec!["frobnicate"],
    ] {
        assert_eq!(delaymid(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn core_validation_errors_exit_with_one() {
    let out = delaymid(&["classic-mid", "--n", "1", "--m", "1", "--s0", "-2", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error_name"], "InvalidInput");
    let out = delaymid(&["roots", "--qp", "/nonexistent/qp.json", "--rect", "-1,1,-1,1"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error_name"], "InputError");
}

#[test]
fn roots_of_unit_circle_pair() {
    let v = json_of(&["roots", "--a", "1,0", "--b", "0", "--tau", "1", "--rect", "-50,50,-100,100"]);
    assert_eq!(v["total_count"], 2);
    let roots = v["roots"].as_array().unwrap();
    let ims: Vec<f64> = roots.iter().map(|r| r["im"].as_f64().unwrap()).collect();
    assert_eq!(ims, vec![-1.0, 1.0]);
}

#[test]
fn designs_round_trip_as_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let design_path = dir.path().join("design.json");
    let out = delaymid(&[
        "classic-mid",
        "--n",
        "2",
        "--m",
        "1",
        "--s0",
        "-5",
        "--tau",
        "1",
        "--output",
        design_path.to_str().unwrap(),
    ]);
    assert!(out.status.success() && out.stdout.is_empty());
    let design: Value = serde_json::from_str(&std::fs::read_to_string(&design_path).unwrap()).unwrap();

    // The whole design and its bare qp object are both accepted.
    let qp_path = dir.path().join("qp.json");
    std::fs::write(&qp_path, design["qp"].to_string()).unwrap();
    for path in [&design_path, &qp_path] {
        let v = json_of(&["roots", "--qp", path.to_str().unwrap(), "--rect", "-6,-4,-1,1"]);
        assert_eq!(v["roots"][0]["multiplicity"], 4);
    }

    let mut child = Command::new(env!("CARGO_BIN_EXE_delaymid"))
        .args(["simulate", "--qp", "-", "--ic", "constant:1", "--T", "5"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(design.to_string().as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let y = v["y"].as_array().unwrap();
    assert_eq!(y[0], 1.0);
    assert!(y.last().unwrap().as_f64().unwrap().abs() < 1e-3);
}

#[test]
fn csv_outputs_have_headers() {
    let out = delaymid(&[
        "simulate", "--a", "1", "--b", "0.5", "--tau", "1", "--ic", "exp:2,-1", "--T", "1", "--steps-per-delay", "10",
        "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,y"));
    assert_eq!(lines.next(), Some("-1.0,5.43656365692"));
    assert_eq!(text.lines().count(), 1 + 21);

    let out = delaymid(&[
        "sensitivity", "--a", "1", "--b", "0.5", "--tau", "1", "--rect", "-5,1,-10,10", "--epsilon", "0.1", "--K", "2",
        "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("k,tau,re,im,multiplicity\n-2,0.8,"), "{text}");
}

#[test]
fn identical_flags_give_identical_bytes() {
    let commands: [&[&str]; 4] = [
        &["classic-mid", "--n", "2", "--m", "1", "--s0", "-5", "--tau", "1"],
        &["control-mid", "--n", "2", "--m", "1", "--a", "-3,2", "--tau", "1"],
        &["roots", "--a", "-3,2", "--b", "3.1104,1.6717", "--tau", "1", "--rect", "-10,10,-20,20"],
        &["sensitivity", "--a", "-3,2", "--b", "3.1104,1.6717", "--tau", "1", "--rect", "-5,5,-10,10", "--epsilon",
            "0.005", "--K", "2"],
    ];
    for args in commands {
        let first = delaymid(args);
        let second = delaymid(args);
        assert!(first.status.success());
        assert_eq!(first.stdout, second.stdout, "{args:?}");
    }
}
