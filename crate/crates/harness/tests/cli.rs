use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use trsp_harness::LoadedScenario;

fn trsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trsp")).args(args).output().expect("binary runs")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"
name = "small"
algorithms = ["dva", "greedy"]
seeds = [1, 2]

[topology]
kind = "grid"
rows = 1
cols = 2
storage_gb = 4.0

[services]
count = 6

[workload]
horizon = 5
users_per_server = 50
"#;

fn write_scenario(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_scenarios_load() {
    let mut count = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let loaded = LoadedScenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            loaded.instance(loaded.scenario.seeds[0], None).unwrap();
            count += 1;
        }
    }
    assert!(count >= 7);
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = trsp(&["run", "--scenario", arg(&scenario), "--out", arg(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for file in ["results.csv", "slot_costs.csv", "summary.csv", "timings.csv", "manifest.json"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,algorithm,sweep_parameter,sweep_value,seed,status,total_gb,placement_gb,refresh_gb,offload_gb"
    );
    assert_eq!(lines.count(), 4);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cells"], 4);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let hash = |extra: &[&str], name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--scenario", arg(&scenario), "--out", arg(&out), "--algo", "dva"];
        args.extend_from_slice(extra);
        assert!(trsp(&args).status.success());
        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&[], "a");
    assert_eq!(base, hash(&[], "b"));
    assert_ne!(base, hash(&["--theta", "0.9"], "c"));
    assert_ne!(base, hash(&["--seeds", "1..=3"], "d"));
}

#[test]
fn partial_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(r#"["dva", "greedy"]"#, r#"["optimal", "greedy"]"#) + "\n[optimal]\nnode_budget = 3\n";
    let scenario = write_scenario(dir.path(), &text);
    let out = dir.path().join("out");
    let o = trsp(&["run", "--scenario", arg(&scenario), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.matches(",ok,").count(), 2);
    assert_eq!(results.matches("error: ").count(), 2);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), &SMALL.replace("kind = \"grid\"", "kind = \"ring\""));
    let o = trsp(&["run", "--scenario", arg(&scenario), "--out", arg(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.toml"));

    let missing = trsp(&["run", "--scenario", arg(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(1));

    let good = write_scenario(dir.path(), SMALL);
    let bad_theta = trsp(&["run", "--scenario", arg(&good), "--theta", "1.5"]);
    assert_eq!(bad_theta.status.code(), Some(1));
}

#[test]
fn summarize_rebuilds_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert!(trsp(&["run", "--scenario", arg(&scenario), "--out", arg(&out)]).status.success());
    let rebuilt = dir.path().join("again.csv");
    let o = trsp(&["summarize", "--results", arg(&out.join("results.csv")), "--out", arg(&rebuilt)]);
    assert!(o.status.success());
    let original = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(std::fs::read_to_string(rebuilt).unwrap(), original);
}

#[test]
fn heatmap_has_one_row_per_server() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let out = dir.path().join("heat.csv");
    assert!(trsp(&["heatmap", "--scenario", arg(&scenario), "--out", arg(&out)]).status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("server,service_0,"));
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 7);
        assert!(line.split(',').skip(1).all(|v| (0.0..=1.0).contains(&v.parse::<f64>().unwrap())));
    }
}

#[test]
fn workload_generation_and_trace_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), SMALL);
    let requests = dir.path().join("requests.csv");
    assert!(trsp(&["workload", "gen", "--scenario", arg(&scenario), "--out", arg(&requests)]).status.success());
    assert!(std::fs::metadata(&requests).unwrap().len() > 0);

    let trace = dir.path().join("trace.csv");
    let o = trsp(&["workload", "sample", "--taxis", "20", "--minutes", "5", "--out", arg(&trace)]);
    assert!(o.status.success());
    let ingested = dir.path().join("ingested.csv");
    let road = scenarios().join("road_trace.toml");
    let o = trsp(&["workload", "ingest", "--trace", arg(&trace), "--scenario", arg(&road), "--out", arg(&ingested)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("100 records"));
}

#[test]
fn optimal_and_bounds_commands() {
    let dir = tempfile::tempdir().unwrap();
    let oracle = scenarios().join("single_server_oracle.toml");
    let out = dir.path().join("opt");
    let o = trsp(&["optimal", "--scenario", arg(&oracle), "--seeds", "1,2", "--out", arg(&out)]);
    assert!(o.status.success());
    assert!(out.join("states_seed2.json").is_file());
    assert_eq!(std::fs::read_to_string(out.join("costs_seed1.csv")).unwrap().lines().count(), 11);

    let bounds = dir.path().join("bounds.json");
    assert!(trsp(&["bounds", "--scenario", arg(&oracle), "--seeds", "3", "--out", arg(&bounds)]).status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(bounds).unwrap()).unwrap();
    assert_eq!(v[0]["seed"], 3);
    assert!(v[0]["report"]["ratio_bound"].as_f64().unwrap() >= 1.0);
}
