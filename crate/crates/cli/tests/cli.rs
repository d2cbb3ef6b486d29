use std::path::PathBuf;

use cycdyn_cli::config::SystemConfig;
use cycdyn_cli::{exit, run_cli, Outcome};
use serde_json::Value;

fn config_file(tag: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("cycdyn-cli-{}-{tag}.json", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Outcome {
    let mut v = vec!["cycdyn"];
    v.extend_from_slice(args);
    run_cli(v)
}

fn json(out: &Outcome) -> Value {
    serde_json::from_str(&out.stdout).unwrap()
}

const QUADRATIC: &str = r#"{"N": 1, "maps": [{"name": "f", "components": ["X1^2 - 1"]}]}"#;
const PAIR: &str = r#"{"N": 1, "maps": [{"name": "f", "components": ["X1^2"]}, {"name": "g", "components": ["X1^2 + 1"]}]}"#;

#[test]
fn height_matches_log_ten() {
    let out = run(&["height", "--point", "3/2,5"]);
    assert_eq!(out.code, exit::OK);
    let v = json(&out);
    assert_eq!(v["command"], "height");
    let value: f64 = v["outputs"]["height"]["value"].as_str().unwrap().parse().unwrap();
    assert!((value - 10f64.ln()).abs() < 1e-15);
}

#[test]
fn height_as_csv() {
    let out = run(&["height", "--point", "3/2,5", "--format", "csv"]);
    assert_eq!(out.code, exit::OK);
    let mut lines = out.stdout.lines();
    assert_eq!(lines.next(), Some("point,value,error"));
    assert!(lines.next().unwrap().starts_with("\"(3/2, 5)\",2.302585092994045684"));
}

#[test]
fn certify_quadratic() {
    let cfg = config_file("certify", QUADRATIC);
    let out = run(&["--config", cfg.to_str().unwrap(), "certify"]);
    assert_eq!(out.code, exit::OK);
    let v = json(&out);
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["command", "inputs", "hypotheses", "outputs", "caps_hit"]);
    let m = &v["outputs"][0];
    assert_eq!(m["e"], 2);
    assert_eq!(m["residual"], "exact-zero");
    assert_eq!(m["constants"]["C"], "1/2");
    assert_eq!(m["constants"]["D"], "2");
}

#[test]
fn orbit_of_periodic_point() {
    let cfg = config_file("orbit", QUADRATIC);
    let out = run(&["--config", cfg.to_str().unwrap(), "orbit", "--point", "0", "--depth", "3"]);
    assert_eq!(out.code, exit::OK);
    let v = json(&out);
    assert_eq!(v["outputs"]["sizes"], serde_json::json!([1, 1, 1, 1]));
    assert_eq!(v["outputs"]["collisions"][0]["m"], 2);
}

#[test]
fn bounds_without_m_is_a_hypothesis_failure() {
    let cfg = config_file("bounds", QUADRATIC);
    let out = run(&["--config", cfg.to_str().unwrap(), "bounds"]);
    assert_eq!(out.code, exit::HYPOTHESIS);
}

#[test]
fn caps_give_exit_two_with_partial_report() {
    let cfg = config_file("caps", PAIR);
    let out = run(&["--config", cfg.to_str().unwrap(), "orbit", "--point", "2", "--depth", "8", "--cap-words", "10"]);
    assert_eq!(out.code, exit::CAPS);
    let v = json(&out);
    assert!(v["error"].as_str().unwrap().contains("cap 10"));
    assert_eq!(v["caps_hit"].as_array().unwrap().len(), 1);
}

#[test]
fn parse_errors_carry_line_and_column() {
    let cfg = config_file("bad", "{\"N\": 1,\n \"maps\": [{\"name\": \"f\", \"components\": [\"X1^^2\"]}]}");
    let out = run(&["--config", cfg.to_str().unwrap(), "certify"]);
    assert_eq!(out.code, exit::PARSE);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("line 2, column"), "{}", out.stderr);
}

#[test]
fn foreign_root_of_unity_rejected() {
    let cfg = config_file("z7", r#"{"n": 4, "N": 1, "maps": [{"name": "f", "components": ["X1^2 + z7"]}]}"#);
    let out = run(&["--config", cfg.to_str().unwrap(), "certify"]);
    assert_eq!(out.code, exit::PARSE);
    assert!(out.stderr.contains("z7"));
}

#[test]
fn bad_point_rejected() {
    let out = run(&["height", "--point", "1/0"]);
    assert_eq!(out.code, exit::PARSE);
    assert!(out.stderr.contains("division by zero"));
}

#[test]
fn output_independent_of_threads() {
    let cfg = config_file("threads", PAIR);
    let c = cfg.to_str().unwrap();
    let a = run(&["--config", c, "canh-semigroup", "--point", "3/2", "--threads", "1"]);
    let b = run(&["--config", c, "canh-semigroup", "--point", "3/2", "--threads", "4"]);
    assert_eq!(a.code, exit::OK);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn monte_carlo_is_seeded() {
    let cfg = config_file("mc", PAIR);
    let c = cfg.to_str().unwrap();
    let args = ["--config", c, "--seed", "7", "canh-semigroup", "--point", "3/2", "--monte-carlo", "--samples", "32"];
    let a = run(&args);
    assert_eq!(a.code, exit::OK);
    assert_eq!(a.stdout, run(&args).stdout);
}

#[test]
fn config_round_trip() {
    let c = SystemConfig::parse(PAIR).unwrap();
    let again = SystemConfig::parse(&c.to_json()).unwrap();
    assert_eq!(c.to_json(), again.to_json());
}
