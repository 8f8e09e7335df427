use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use coincidence_lab::scenario::parse_scenario;
use proptest::prelude::*;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coincidence-lab"))
}

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn write_scenario(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn node_sweep() -> Value {
    json!({
        "experiment": "ratio_sweep",
        "psi1": {"family": "box", "n": 2, "length": 1.0},
        "psi2": {"family": "box", "n": 1, "length": 1.0},
        "x0": 0.5,
        "sweep": {"a_values": [0.0, 1.0], "delta_over_lambda": 1e-6}
    })
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["fig2.json", "limit_order_node.json", "limit_order_regular.json", "event_ratio.json", "mean_density.json"] {
        let out = bin().arg("validate").arg(scenario_file(name)).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
    }
}

#[test]
fn converged_run_exits_zero_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "sweep.json", &node_sweep());
    let out = run_in(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // default output name comes from the scenario file stem
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("a,ratio_bos_dis,ratio_fer_dis,error,converged"));
    assert_eq!(csv.lines().count(), 3);

    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tool"], "coincidence-lab");
    assert_eq!(manifest["convergence"]["rows"], 2);
    assert_eq!(manifest["convergence"]["flagged_rows"], json!([]));
    // the echoed scenario parses back to the same scenario
    let echoed = parse_scenario(&manifest["scenario"].to_string()).unwrap();
    assert_eq!(echoed, parse_scenario(&node_sweep().to_string()).unwrap());
}

#[test]
fn partial_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = node_sweep();
    // at a = 4 the right window lies beyond the box wall, where nothing is detected
    s["x0"] = json!(0.999999);
    s["sweep"] = json!({"a_values": [0.0, 4.0], "delta": 1e-6});
    let path = write_scenario(dir.path(), "edge.json", &s);
    let out = run_in(dir.path(), &["run", path.to_str().unwrap(), "--out", "edge.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("edge.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["convergence"]["flagged_rows"], json!([1]));
    let csv = fs::read_to_string(dir.path().join("edge.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",nan,"));
}

#[test]
fn invalid_scenarios_exit_one() {
    let dir = tempfile::tempdir().unwrap();

    let mut same = node_sweep();
    same["psi2"] = same["psi1"].clone();
    let path = write_scenario(dir.path(), "same.json", &same);
    let out = run_in(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-orthogonal"));
    assert!(!dir.path().join("same.csv").exists());

    let mut wide = node_sweep();
    wide["sweep"] = json!({"a_values": [1.0], "delta": 1.0});
    let path = write_scenario(dir.path(), "wide.json", &wide);
    let out = run_in(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("narrow-detector"));

    fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let out = run_in(dir.path(), &["validate", "broken.json"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run_in(dir.path(), &["run", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_orthogonal_override_warns() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = node_sweep();
    s["psi2"] = json!({"family": "oscillator", "n": 0, "sigma": 0.2});
    s["x0"] = json!(0.3);
    s["allow_non_orthogonal"] = json!(true);
    let path = write_scenario(dir.path(), "mixed.json", &s);
    let out = run_in(dir.path(), &["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: non-orthogonal pair"));
}

#[test]
fn limit_order_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["run", scenario_file("limit_order_node.json").to_str().unwrap(), "--format", "json", "--out", "lim.json", "--jobs", "2"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lim.json")).unwrap()).unwrap();
    let get = |p: &str, s: &str| v[p][s].as_f64().unwrap();
    assert!((get("eta_first", "bos") - 1.0).abs() < 1e-6);
    assert!((get("eta_first", "fer") - 1.0).abs() < 1e-6);
    assert!(get("delta_first", "bos").abs() < 1e-6);
    assert!((get("delta_first", "fer") - 2.0).abs() < 1e-6);
    assert_eq!(v["estimates"].as_array().unwrap().len(), 4);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("lim.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["jobs"], 2);
    assert_eq!(m["output"]["format"], "json");
}

#[test]
fn catalog_lists_every_family() {
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for family in ["box", "oscillator", "plane", "local_regular", "local_node"] {
        assert!(text.contains(family));
    }
}

fn sweep_scenario() -> impl Strategy<Value = Value> {
    (
        prop::collection::vec(0.0f64..10.0, 1..6),
        1e-9f64..1e-2,
        prop::bool::ANY,
        prop::sample::select(vec!["csv", "json"]),
        prop::option::of("[a-z]{1,8}"),
    )
        .prop_map(|(a_values, d, relative, format, name)| {
            let mut s = node_sweep();
            s["sweep"] = if relative {
                json!({"a_values": a_values, "delta_over_lambda": d})
            } else {
                json!({"a_values": a_values, "delta": d * 0.5})
            };
            s["output"] = json!({"format": format});
            if let Some(n) = name {
                s["name"] = json!(n);
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_echo_round_trips(doc in sweep_scenario()) {
        let parsed = parse_scenario(&doc.to_string()).unwrap();
        let echoed = parse_scenario(&parsed.to_json().to_string()).unwrap();
        prop_assert_eq!(parsed, echoed);
    }
}
