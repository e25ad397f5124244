//! End-to-end command-line behavior through the in-process entry point.

use std::fs;
use std::path::Path;

use rigid_consensus::cli::{
    compare_reports, output_paths, run_cli, EXIT_COMPARE, EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_USAGE,
};
use rigid_consensus::scenario::PAPER_DEFAULT_TOML;
use rigid_consensus::sim::{parse_trace_csv, MetricsReport};
use rigid_consensus::trigger::TriggerMode;

struct Outcome {
    code: i32,
    out: String,
    err: String,
}

fn cli(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("rigid-consensus").chain(args.iter().copied());
    let code = run_cli(argv, &mut out, &mut err);
    Outcome { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli(&["run", "paper_default", "--mode", "self", "--t-final", "2", "--out", path_str(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}{}", r.out, r.err);
    assert!(r.out.contains("self mode, 200 steps"), "{}", r.out);

    let [trace, json, text] = output_paths(dir.path(), TriggerMode::SelfTriggered);
    let table = parse_trace_csv(std::io::BufReader::new(fs::File::open(&trace).unwrap())).unwrap();
    assert_eq!(table.n_agents(), 6);
    assert_eq!(table.rows.len(), 201);

    let from_json = MetricsReport::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    let from_text = MetricsReport::from_text(&fs::read_to_string(&text).unwrap()).unwrap();
    assert_eq!(from_json, from_text);
    assert_eq!(from_json.mode, TriggerMode::SelfTriggered);
    assert_eq!(from_json.agents.len(), 6);
    assert!(from_json.agents.iter().all(|a| a.event_count >= 1));
}

#[test]
fn compare_identical_reports_has_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli(&["run", "paper_default", "--mode", "dynamic", "--t-final", "1", "--out", path_str(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let [_, json, text] = output_paths(dir.path(), TriggerMode::Dynamic);

    let r = cli(&["compare", path_str(&json), path_str(&text)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let agent_rows: Vec<&str> = r.out.lines().skip(2).take(6).collect();
    assert_eq!(agent_rows.len(), 6);
    for row in agent_rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[3], "0", "{row}");
    }
    for line in r.out.lines().skip_while(|l| !l.starts_with("total")).skip(1) {
        let diff: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert_eq!(diff, 0.0, "{line}");
    }
}

#[test]
fn compare_rejects_mismatched_or_malformed_reports() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli(&["run", "paper_default", "--t-final", "0.5", "--out", path_str(dir.path())]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let [_, json, _] = output_paths(dir.path(), TriggerMode::Dynamic);
    let full = MetricsReport::from_json(&fs::read_to_string(&json).unwrap()).unwrap();

    let mut fewer = full.clone();
    fewer.agents.pop();
    assert!(compare_reports(&full, &fewer).is_err());
    let fewer_path = dir.path().join("fewer.json");
    fs::write(&fewer_path, fewer.to_json()).unwrap();
    let r = cli(&["compare", path_str(&json), path_str(&fewer_path)]);
    assert_eq!(r.code, EXIT_COMPARE);
    assert!(r.err.contains("agent sets differ"), "{}", r.err);

    let empty = dir.path().join("empty.json");
    fs::write(&empty, "").unwrap();
    assert_eq!(cli(&["compare", path_str(&json), path_str(&empty)]).code, EXIT_COMPARE);

    let missing = dir.path().join("missing.json");
    assert_eq!(cli(&["compare", path_str(&json), path_str(&missing)]).code, EXIT_IO);
}

#[test]
fn validate_reports_the_shipped_scenario() {
    let r = cli(&["validate", "paper_default"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(r.out.trim(), "paper_default: ok (6 agents, dynamic mode, dt = 0.01 s, 4000 steps)");
}

#[test]
fn invalid_scenarios_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, PAPER_DEFAULT_TOML.replacen("theta_s = 2.0", "theta_s = 0.1", 1)).unwrap();
    let r = cli(&["validate", path_str(&bad)]);
    assert_eq!(r.code, EXIT_CONFIG);
    assert!(r.err.contains("theta"), "{}", r.err);

    let r = cli(&["run", "paper_default", "--dt=-0.01", "--out", path_str(dir.path())]);
    assert_eq!(r.code, EXIT_CONFIG, "{}", r.err);

    assert_eq!(cli(&["validate", path_str(&dir.path().join("nope.toml"))]).code, EXIT_IO);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&[]).code, EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cli(&["run", "paper_default", "--mode", "sometimes"]).code, EXIT_USAGE);
    let help = cli(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    assert!(help.out.contains("validate"));
}

#[test]
fn sweep_writes_one_entry_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli(&[
        "sweep",
        "paper_default",
        "--mode",
        "dynamic,self",
        "--gamma",
        "0.5,1.0",
        "--t-final",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    let entries: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(entries.len(), 4);
    let keys: Vec<(String, f64)> =
        entries.iter().map(|e| (e["mode"].as_str().unwrap().to_string(), e["gamma"].as_f64().unwrap())).collect();
    assert_eq!(
        keys,
        vec![("dynamic".into(), 0.5), ("dynamic".into(), 1.0), ("self".into(), 0.5), ("self".into(), 1.0)]
    );
    assert!(entries.iter().all(|e| e["metrics"].is_object() && e["error"].is_null()));
}
