use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn wpisac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpisac"))
        .args(args)
        .env_remove("WPT_ISAC_LOG")
        .output()
        .expect("run wpisac")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn generate_is_reproducible_and_shaped() {
    let a = wpisac(&["generate", "--seed", "3"]);
    let b = wpisac(&["generate", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc = json(&a);
    assert_valid(&schema("scenario.schema.json"), &doc);
    let gains = doc["h_to_target"].as_array().unwrap();
    assert_eq!(gains.len(), 11);
    assert!(gains.iter().all(|row| row.as_array().unwrap().len() == 10));

    let small = json(&wpisac(&[
        "generate",
        "--params.num_users=2",
        "--params.num_targets",
        "1",
    ]));
    assert_eq!(small["user_pos"].as_array().unwrap().len(), 2);
    assert_eq!(small["h_to_target"].as_array().unwrap().len(), 3);
    assert_eq!(small["params"]["zeta"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_all_schemes_validates_and_ranks() {
    let out = wpisac(&["solve", "--seed", "7", "--scheme", "all"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let v = schema("solve_report.schema.json");
    let objective = |name: &str| {
        let report = &doc[name];
        assert_valid(&v, report);
        assert!(report["timing_ms"].is_null());
        report["objective_trace"]
            .as_array()
            .unwrap()
            .last()
            .unwrap()
            .as_f64()
            .unwrap()
    };
    let proposed = objective("proposed");
    assert!(proposed >= objective("equal-time"));
    assert!(proposed >= objective("max-power"));
    assert!(doc["proposed"]["objective_trace"].as_array().unwrap().len() >= 2);
}

#[test]
fn infeasible_solve_exits_with_two() {
    let out = wpisac(&["solve", "--scheme", "max-power", "--params.eta=1e-6"]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json(&out);
    assert_valid(&schema("solve_report.schema.json"), &doc);
    assert_eq!(doc["status"], "Infeasible");
}

#[test]
fn iteration_cap_exits_with_one() {
    let out = wpisac(&["solve", "--max-outer-iters", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["status"], "MaxIters");
}

#[test]
fn solve_trace_csv() {
    let out = wpisac(&["solve", "--format", "csv", "--scheme", "proposed"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("scheme,iteration,min_throughput_bits"));
    assert!(lines.all(|l| l.starts_with("proposed,")));
}

#[test]
fn sweep_table_has_every_cell() {
    let out = wpisac(&[
        "sweep",
        "--sweep-axis",
        "eta",
        "--sweep-values",
        "0.01,0.05,0.1",
        "--scheme",
        "all",
        "--format",
        "csv",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "axis_value,scheme,min_throughput_bits,status,iterations"
    );
    assert_eq!(lines.len(), 10);
    assert!(lines[1].starts_with("0.01,proposed,"));
    assert!(lines[9].starts_with("0.1,max-power,"));

    let out = wpisac(&[
        "sweep",
        "--sweep-axis",
        "p0",
        "--sweep-values",
        "5,10",
        "--format",
        "json",
    ]);
    let doc = json(&out);
    assert_valid(&schema("sweep.schema.json"), &doc);
    assert_eq!(doc.as_array().unwrap().len(), 2);
}

#[test]
fn bad_sweep_values_are_rejected() {
    let out = wpisac(&["sweep", "--sweep-axis", "eta", "--sweep-values", "0.1,0.05"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# small instance\nseed = 4\nparams.num_users = 2\nparams.num_targets=1\nformat=csv\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = json(&wpisac(&["generate", "--config", cfg]));
    assert_eq!(from_file["seed"], 4);
    assert_eq!(from_file["params"]["num_users"], 2);
    let flagged = json(&wpisac(&[
        "generate",
        "--config",
        cfg,
        "--seed",
        "5",
        "--params.num_users=3",
    ]));
    assert_eq!(flagged["seed"], 5);
    assert_eq!(flagged["params"]["num_users"], 3);
    assert_eq!(flagged["params"]["num_targets"], 1);
}

#[test]
fn scenario_file_matches_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let path = path.to_str().unwrap();
    assert!(wpisac(&["generate", "--seed", "2", "--out", path])
        .status
        .success());
    let a = wpisac(&["solve", "--scenario", path]);
    let b = wpisac(&["solve", "--seed", "2"]);
    assert_eq!(a.stdout, b.stdout);
    let both = wpisac(&["solve", "--scenario", path, "--seed", "2"]);
    assert_eq!(both.status.code(), Some(1));
    let frozen = wpisac(&["solve", "--scenario", path, "--params.num_users=3"]);
    assert_eq!(frozen.status.code(), Some(1));
}

#[test]
fn oracle_and_tables() {
    let out = wpisac(&[
        "oracle",
        "--seed",
        "0",
        "--params.num_users=2",
        "--params.num_targets=1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["status"], "Solved");
    assert!(doc["objective"].as_f64().unwrap() > 0.0);

    let refused = wpisac(&["oracle", "--params.num_users=4"]);
    assert_eq!(refused.status.code(), Some(1));

    let tables = json(&wpisac(&[
        "dump-tables",
        "--params.num_users=2",
        "--params.num_targets=3",
    ]));
    assert_eq!(tables["targets"].as_array().unwrap().len(), 3);
    assert_eq!(tables["targets"][0]["beta"].as_array().unwrap().len(), 4);
}

#[test]
fn timing_is_opt_in() {
    let out = json(&wpisac(&[
        "solve",
        "--timing",
        "--params.num_users=2",
        "--params.num_targets=1",
        "--seed",
        "0",
    ]));
    assert!(out["timing_ms"]["total"].as_f64().is_some());
}
