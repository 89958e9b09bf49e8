use std::process::{Command, Output};

use serde_json::Value;

fn orbigw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orbigw")).args(args).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn describe_three_one_one_one() {
    let o = orbigw(&["--r", "3", "--m", "1", "--s", "1", "--f", "1", "describe"]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["result"]["order"], 3);
    assert_eq!(v["result"]["genus"], 1);
    assert_eq!(v["result"]["p"], 1);
    assert_eq!(v["result"]["critical_points"].as_array().unwrap().len(), 3);
    assert_eq!(v["provenance"]["tool"], "orbigw");
}

#[test]
fn disk_leading_coefficient() {
    let o = orbigw(&["fgn", "--side", "a", "--g", "0", "--n", "1", "--max-winding", "3"]);
    assert!(o.status.success());
    let v = json(&o);
    let c = &v["result"]["coefficients"][0];
    assert_eq!(c["legs"][0][0], 1);
    let re = c["value"][0].as_f64().unwrap();
    assert!((re - 1.0).abs() < 1e-14, "{re}");
}

#[test]
fn psi_exact() {
    let v = json(&orbigw(&["psi", "--g", "1", "--ks", "1"]));
    assert_eq!(v["result"]["exact"], "1/24");
    let v = json(&orbigw(&["psi", "--g", "0", "--ks", "0,0,0,1"]));
    assert_eq!(v["result"]["exact"], "1");
}

#[test]
fn output_is_independent_of_thread_count() {
    let args = ["--r", "2", "--m", "1", "--s", "0", "--f", "1", "fgn", "--side", "b", "--g", "1", "--n", "1", "--tau-degree", "1"];
    let one = orbigw(&[&["--threads", "1"], &args[..]].concat());
    let four = orbigw(&[&["--threads", "4"], &args[..]].concat());
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(orbigw(&["--r", "0", "describe"]).status.code(), Some(2));
    assert_eq!(orbigw(&["--r", "2", "eo", "--g", "0", "--n", "3"]).status.code(), Some(2));
    assert_eq!(orbigw(&["fgn", "--side", "a", "--g", "1", "--n", "1", "--heights", "0"]).status.code(), Some(3));
    assert_eq!(orbigw(&["mirrormap", "--degree", "0"]).status.code(), Some(2));
}

#[test]
fn quick_checks_pass() {
    for w in ["structure", "psi", "bridge", "mirrormap"] {
        let o = orbigw(&["check", w]);
        assert_eq!(o.status.code(), Some(0), "{w}: {}", String::from_utf8_lossy(&o.stdout));
    }
    let o = orbigw(&["eo", "check", "pants", "--output", "table"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn eo_matches_graph_sum() {
    let e = json(&orbigw(&["eo", "--g", "1", "--n", "1", "--max-winding", "3"]));
    let b = json(&orbigw(&["fgn", "--side", "b", "--g", "1", "--n", "1", "--max-winding", "3"]));
    let ec = e["result"]["coefficients"].as_array().unwrap();
    let bc = b["result"]["coefficients"].as_array().unwrap();
    assert_eq!(ec.len(), bc.len());
    for (x, y) in ec.iter().zip(bc) {
        assert_eq!(x["legs"], y["legs"]);
        let (a, b) = (x["value"][0].as_f64().unwrap(), y["value"][0].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} {b}");
    }
}

#[test]
fn writes_to_file() {
    let p = std::env::temp_dir().join(format!("orbigw-cli-{}.json", std::process::id()));
    let o = orbigw(&["--out", p.to_str().unwrap(), "mirrormap", "--degree", "2", "--r", "3", "--s", "1"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    std::fs::remove_file(&p).ok();
    assert_eq!(v["result"]["p"], 1);
}
