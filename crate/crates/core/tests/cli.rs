use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ftsc"))
}

fn instance(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances").join(name)
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = bin().args(args).output().unwrap();
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v)
}

fn failed_checks(v: &Value) -> Vec<String> {
    v["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).map(|c| c["name"].as_str().unwrap().to_string()).collect()
}

#[test]
fn validate_edge_passes() {
    let (code, v) = run(&["validate", "--instance", instance("edge.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["passed"], true);
}

#[test]
fn triangularity_names_the_block() {
    let (code, v) = run(&["validate", "--instance", instance("triangularity.json").to_str().unwrap()]);
    assert_eq!(code, 1);
    let tri = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "TriangularityViolation").unwrap();
    assert_eq!(tri["certificates"][0]["detail"], "b<-a");
    assert_eq!(tri["certificates"][0]["simplex"], "0");
}

#[test]
fn flow_barycenter() {
    let (code, v) = run(&["flow", "--k", "2", "--start", "1/3,1/3,1/3"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["limit"], 2);
    let (_, b) = run(&["flow", "--k", "2", "--start", "1/3,1/3,1/3", "--backward"]);
    assert_eq!(b["results"]["limit"], 0);
}

#[test]
fn bad_input_exits_2() {
    assert_eq!(run(&["validate", "--instance", "/nonexistent.json"]).0, 2);
    assert_eq!(run(&["validate"]).0, 2);
    assert_eq!(run(&["flow", "--k", "2", "--start", "1,1,1"]).0, 2);
}

#[test]
fn extend_composes_with_the_pipeline() {
    let dir = std::env::temp_dir().join(format!("ftsc-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("edge.json");
    let status = bin()
        .args(["extend", "--instance", instance("edge_vertices.json").to_str().unwrap(), "--output", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    for cmd in ["validate", "build-aprime", "build-iprime", "smooth", "igusa", "holonomy", "homology"] {
        let (code, v) = run(&[cmd, "--instance", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{cmd}: {:?}", failed_checks(&v));
    }
    let (code, v) = run(&["smooth", "--instance", out.to_str().unwrap(), "--partition", "linear"]);
    assert_eq!(code, 1);
    assert!(failed_checks(&v).contains(&"PartitionFirstOrder".to_string()));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn infeasible_extension_is_a_check_failure() {
    let dir = std::env::temp_dir().join(format!("ftsc-infeasible-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let text = std::fs::read_to_string(instance("edge.json")).unwrap().replace(r#""1": {"a←b": [["1"]]}"#, r#""1": {"a←b": [["2"]]}"#);
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["coefficients"].as_object_mut().unwrap().remove("0,1");
    let inp = dir.join("in.json");
    let rep = dir.join("report.json");
    std::fs::write(&inp, v.to_string()).unwrap();
    let out = bin().args(["extend", "--instance", inp.to_str().unwrap(), "--report", rep.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let cert = r["checks"][0]["certificates"][0].as_str().unwrap();
    assert!(cert.contains("(0,1)"), "{cert}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reports_are_byte_identical_without_timings() {
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timings_ms");
        serde_json::to_string(&v).unwrap()
    };
    let args = ["build-iprime", "--seed", "5"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.0, 0);
    assert_eq!(strip(a.1), strip(b.1));
}

#[test]
fn circle_model_homology() {
    let (code, v) = run(&["homology", "--instance", instance("triangle_circle.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["fiber_betti"], serde_json::json!({"0": 1, "1": 1}));
}
