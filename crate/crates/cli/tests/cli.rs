use std::fs;
use std::path::Path;
use std::process::Command;

use growthnet_cli::config::{Method, RunConfig};
use growthnet_cli::{run, EXIT_CAPACITY, EXIT_OK, EXIT_REGIME, EXIT_VALIDATION};
use serde_json::Value;

fn invoke(args: &[&str]) -> i32 {
    run(std::iter::once("growthnet").chain(args.iter().copied()))
}

fn invoke_to(dir: &Path, name: &str, args: &[&str]) -> (i32, Option<String>) {
    let out = dir.join(name);
    let out_s = out.to_str().unwrap().to_string();
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", &out_s]);
    let code = invoke(&full);
    (code, fs::read_to_string(&out).ok())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn compare_small_network_against_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "cmp.json",
        &["compare", "--m", "2", "--class", "1:2", "--seed", "4"],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    assert_eq!(v["result"]["reference"], "exact");
    let rows = v["result"]["rows"].as_array().unwrap();
    let methods: Vec<&str> = rows.iter().map(|r| r["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["exact", "simulate", "asymptotic"]);
    let sim = rows.iter().find(|r| r["method"] == "simulate").unwrap();
    assert!(sim["tv_distance"].as_f64().unwrap() < 0.01);
    assert_eq!(v["config"]["simulation"]["seed"], 4);
}

#[test]
fn compare_has_one_row_per_method_and_class() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "cmp.json",
        &[
            "compare", "--m", "40", "--class", "20:10", "--class", "60:5", "--class", "90:2",
            "--events", "200000",
        ],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    let rows = v["result"]["rows"].as_array().unwrap();
    for method in ["exact", "simulate", "asymptotic"] {
        let classes: Vec<u64> = rows
            .iter()
            .filter(|r| r["method"] == method)
            .map(|r| r["class"].as_u64().unwrap())
            .collect();
        assert_eq!(classes, [0, 1, 2], "{method}");
    }
}

#[test]
fn asymptotic_reports_psi() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "asy.json",
        &["asymptotic", "--m", "1000", "--class", "1000:1000"],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    let psi = v["result"]["diagnostics"]["psi"].as_f64().unwrap();
    assert!((psi - 0.381966).abs() < 1e-6);
    assert_eq!(v["result"]["regime"], "LinearBottleneck");
    assert_eq!(v["result"]["per_class_law"][0]["law"], "geometric");
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model\nm = 3").unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "out.json",
        &["exact", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_VALIDATION);
    assert!(text.is_none());

    fs::write(&cfg, "[model]\nm = 3\nunknown = true\n").unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "out.json",
        &["exact", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_VALIDATION);
    assert!(text.is_none());

    let (code, _) = invoke_to(
        dir.path(),
        "out.json",
        &["exact", "--m", "3", "--class", "1"],
    );
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn errors_map_to_exit_codes_and_error_objects() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(dir.path(), "v.json", &["exact", "--m", "3", "--class=-1:2"]);
    assert_eq!(code, EXIT_VALIDATION);
    assert_eq!(json(&text.unwrap())["error"]["kind"], "validation");

    let (code, text) = invoke_to(
        dir.path(),
        "c.json",
        &[
            "exact", "--m", "20000000", "--class", "1:1", "--class", "2:1",
        ],
    );
    assert_eq!(code, EXIT_CAPACITY);
    let v = json(&text.unwrap());
    assert_eq!(v["error"]["exit_code"], EXIT_CAPACITY);

    let (code, text) = invoke_to(
        dir.path(),
        "r.json",
        &["asymptotic", "--m", "1000", "--class", "100:2"],
    );
    assert_eq!(code, EXIT_REGIME);
    assert_eq!(json(&text.unwrap())["error"]["kind"], "regime");

    let (code, _) = invoke_to(
        dir.path(),
        "o.json",
        &[
            "asymptotic",
            "--m",
            "1000",
            "--class",
            "100:2",
            "--regime",
            "overloaded",
        ],
    );
    assert_eq!(code, EXIT_REGIME);

    let (code, text) = invoke_to(
        dir.path(),
        "f.json",
        &[
            "fleet",
            "--route-load",
            "10",
            "--locations",
            "2",
            "--alpha",
            "1.5",
        ],
    );
    assert_eq!(code, EXIT_VALIDATION);
    assert_eq!(json(&text.unwrap())["error"]["kind"], "domain");
}

#[test]
fn simulate_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--m", "30", "--class", "5:3", "--class", "9:2", "--seed", "17", "--events",
        "50000",
    ];
    let (c1, a) = invoke_to(dir.path(), "sim.json", &args);
    let (c2, b) = invoke_to(dir.path(), "sim.json", &args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a, b);
    let v = json(&a.unwrap());
    assert_eq!(v["result"]["seed"], 17);
    assert_eq!(v["result"]["events_used"], 50000);
}

#[test]
fn report_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
method = "simulate"

[model]
m = 12
classes = [{ kappa = 2.0, count = 2 }, { kappa = 8.0, count = 1 }]

[simulation]
seed = 5
events = 20000
burnin_events = 100
"#,
    )
    .unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "out.json",
        &["simulate", "--config", cfg.to_str().unwrap(), "--seed", "6"],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["library_version"], growthnet::VERSION);
    let echoed: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(echoed.method, Method::Simulate);
    assert_eq!(echoed.simulation.as_ref().unwrap().seed, 6);
    assert_eq!(echoed.simulation.as_ref().unwrap().events, 20000);
    assert_eq!(echoed.model.as_ref().unwrap().m, 12);
    for table in v["result"]["classes"].as_array().unwrap() {
        let p: f64 = table["pmf"]["probability"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap())
            .sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    // the config names a different method
    let (code, _) = invoke_to(
        dir.path(),
        "x.json",
        &["exact", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code, EXIT_VALIDATION);
}

#[test]
fn exact_csv_has_pmf_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "e.csv",
        &["exact", "--m", "2", "--class", "1:2", "--format", "csv"],
    );
    assert_eq!(code, EXIT_OK);
    let text = text.unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "distribution,value,probability,log_probability"
    );
    let pool: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("free_pool,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    let expected = [6.0 / 11.0, 4.0 / 11.0, 1.0 / 11.0];
    for (a, b) in pool.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_probabilities_have_null_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "s.json",
        &[
            "simulate", "--m", "3", "--class", "1000:1", "--events", "20", "--burnin", "0",
        ],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    let pool = &v["result"]["free_pool"];
    for (p, lp) in pool["probability"]
        .as_array()
        .unwrap()
        .iter()
        .zip(pool["log_probability"].as_array().unwrap())
    {
        assert_eq!(p.as_f64().unwrap() == 0.0, lp.is_null());
    }
}

#[test]
fn fleet_and_bottleneck_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = invoke_to(
        dir.path(),
        "fleet.json",
        &[
            "fleet",
            "--route-load",
            "100",
            "--locations",
            "10",
            "--alpha",
            "0.9",
            "--customers",
            "500",
        ],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    assert_eq!(v["result"]["sizing"]["customers"], 180);
    let evals = v["result"]["evaluations"].as_array().unwrap();
    assert_eq!(evals.len(), 2);
    let a = evals[0]["service_level"]["alpha"].as_f64().unwrap();
    assert!((0.88..=0.92).contains(&a));

    let (code, text) = invoke_to(
        dir.path(),
        "b.json",
        &[
            "bottleneck",
            "--m",
            "50",
            "--poisson-mean",
            "2",
            "--poisson-mean",
            "1",
            "--utilization",
            "0.5",
            "--utilization",
            "0.8",
        ],
    );
    assert_eq!(code, EXIT_OK);
    let v = json(&text.unwrap());
    let nodes = v["result"]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 2);
    assert_eq!(nodes[1]["pmf"]["support_max"], 50);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_growthnet");
    let ok = Command::new(bin)
        .args(["exact", "--m", "2", "--class", "1:2"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["method"], "exact");

    let regime = Command::new(bin)
        .args(["asymptotic", "--m", "1000", "--class", "100:2"])
        .output()
        .unwrap();
    assert_eq!(regime.status.code(), Some(EXIT_REGIME));
    assert!(String::from_utf8_lossy(&regime.stderr).contains("exact engine"));

    let usage = Command::new(bin)
        .args(["exact", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_VALIDATION));
}
