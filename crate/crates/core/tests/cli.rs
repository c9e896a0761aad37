use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use truncdp::accountant::{alpha_grid, rdp_to_dp, RenyiOrder};

fn run_with(args: &[&str], stdin: Option<&[u8]>, env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_truncdp"));
    cmd.args(args).env_remove("TRUNCDP_LEDGER").stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    let mut pipe = child.stdin.take().unwrap();
    if let Some(input) = stdin {
        pipe.write_all(input).unwrap();
    }
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn run(args: &[&str]) -> Output {
    run_with(args, None, &[])
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn assert_schema(name: &str, text: &str) -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/schemas/").to_string() + name + ".schema.json";
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: Value = serde_json::from_str(text).unwrap_or_else(|e| panic!("{name}: not JSON ({e}): {text}"));
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
    instance
}

const GAUSS: [&str; 8] = ["--mechanism", "gaussian", "--sigma", "1", "--a", "-1", "--b", "2"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn untruncated_gaussian_row() {
    let o = run(&["rdp", "--mechanism", "gaussian", "--sigma", "1", "--a", "-1e6", "--b", "1e6", "--alpha-grid", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = assert_schema("rdp", &stdout(&o));
    assert!((v["rdp"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["rdp_untruncated"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn laplace_case_tags() {
    let o = run(&["rdp", "--mechanism", "laplace", "--lambda", "0.5", "--a", "-3", "--b", "-1", "--json"]);
    let v = assert_schema("rdp", &stdout(&o));
    assert!(v["rdp"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));
    assert!(v["case_tags"].as_array().unwrap().iter().all(|t| t == "I"));
    let o = run(&["rdp", "--mechanism", "laplace", "--lambda", "0.5", "--a", "-1", "--b", "2", "--alpha-grid", "2,8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with("numeric")).count(), 2, "{text}");
}

#[test]
fn invalid_input_names_the_problem() {
    let o = run(&["rdp", "--mechanism", "gaussian", "--sigma", "1", "--a", "2", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = run(&["rdp", "--mechanism", "laplace", "--sigma", "1", "--a", "0", "--b", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--lambda"));
}

#[test]
fn convert_sources() {
    let o = run(&["convert", "--delta", "1e-5", "--rdp", "1", "--alpha", "10", "--json"]);
    let point = assert_schema("convert", &stdout(&o));
    assert!((point["epsilon"].as_f64().unwrap() - 1.91801).abs() < 1e-5);

    let report = run(&with(&["rdp", "--json"], &GAUSS));
    let from_report = run_with(&["convert", "--delta", "1e-5", "--json"], Some(&report.stdout), &[]);
    let from_flags = run(&with(&["convert", "--delta", "1e-5", "--json"], &GAUSS));
    let a = assert_schema("convert", &stdout(&from_report));
    let b = assert_schema("convert", &stdout(&from_flags));
    assert_eq!(a["epsilon"], b["epsilon"]);
    let rdp: Value = serde_json::from_slice(&report.stdout).unwrap();
    assert_eq!(a["epsilon"], rdp["epsilon"]);

    let curve = br#"{"points":[{"alpha":2,"rdp":0.5},{"alpha":10,"rdp":1}]}"#;
    let o = run_with(&["convert", "--delta", "1e-5", "--json"], Some(curve), &[]);
    let c = assert_schema("convert", &stdout(&o));
    assert!(c["epsilon"].as_f64().unwrap() <= point["epsilon"].as_f64().unwrap());

    let eps = |delta: &str| {
        let o = run(&["convert", "--delta", delta, "--rdp", "1", "--alpha", "10", "--json"]);
        serde_json::from_slice::<Value>(&o.stdout).unwrap()["epsilon"].as_f64().unwrap()
    };
    assert!(eps("1e-9") > eps("0.5"));

    for bad in ["0", "1", "1.5", "-0.1"] {
        assert_eq!(run(&["convert", "--delta", bad, "--rdp", "1", "--alpha", "10"]).status.code(), Some(2), "{bad}");
    }
    assert_eq!(run_with(&["convert", "--delta", "1e-5"], Some(b"not json"), &[]).status.code(), Some(2));
}

#[test]
fn calibrate_outputs() {
    let o = run(&["calibrate", "--mechanism", "gaussian", "--epsilon", "2", "--a", "-1", "--b", "2", "--steps", "10", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = assert_schema("calibrate", &stdout(&o));
    assert!(v["epsilon"].as_f64().unwrap() <= 2.0);
    let o = run(&["calibrate", "--mechanism", "laplace", "--epsilon", "1", "--a", "2", "--b", "3", "--json"]);
    let v = assert_schema("calibrate", &stdout(&o));
    assert_eq!(v["free"], true);
    let o = run(&["calibrate", "--mechanism", "gaussian", "--epsilon", "1e-6", "--a", "-1e6", "--b", "1e6"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sample_contract() {
    let args = with(&["sample", "--value", "0.3", "--n", "200", "--seed", "5"], &GAUSS);
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let values: Vec<f64> = stdout(&a).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), 200);
    assert!(values.iter().all(|&v| (-1.0..=2.0).contains(&v)));

    let json = run(&with(&args, &["--json"]));
    let v = assert_schema("sample", &stdout(&json));
    let from_json: Vec<f64> = v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(from_json, values);

    let rejection = run(&with(&args, &["--sampler", "rejection-loop", "--json"]));
    let v = assert_schema("sample", &stdout(&rejection));
    assert!(v["attempts"].as_array().unwrap().iter().any(|k| k.as_u64().unwrap() > 1));

    let unseeded = run(&with(&["sample", "--value", "0.3"], &GAUSS));
    let err = String::from_utf8(unseeded.stderr).unwrap();
    let seed = err.trim().strip_prefix("seed=").expect("generated seed reported");
    let replay = run(&with(&["sample", "--value", "0.3", "--seed", seed], &GAUSS));
    assert_eq!(replay.stdout, unseeded.stdout);

    let starved = ["sample", "--mechanism", "gaussian", "--sigma", "0.01", "--a", "50", "--b", "51", "--value", "0"];
    let o = run(&with(&starved, &["--seed", "1", "--sampler", "rejection-loop", "--max-attempts", "50"]));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn ledger_through_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ledger.json");
    let args = with(&["sample", "--value", "1", "--n", "2", "--seed", "1"], &GAUSS);
    assert_eq!(run_with(&args, None, &[("TRUNCDP_LEDGER", &path)]).status.code(), Some(0));
    let explicit = dir.path().join("other.json");
    let mut flagged = args.clone();
    let explicit_str = explicit.to_str().unwrap();
    flagged.extend(["--ledger", explicit_str]);
    assert_eq!(run(&flagged).status.code(), Some(0));
    for p in [&path, &explicit] {
        let text = std::fs::read_to_string(p).unwrap();
        let v = assert_schema("ledger", &text);
        assert_eq!(v["entries"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn validate_contract() {
    let o = run(&["validate", "--suite", "jensen", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = assert_schema("validate", &stdout(&o));
    assert_eq!(v["passed"], true);
    let o = run(&["validate", "--suite", "closed-form-vs-oracle", "--fault", "corrupted-closed-form", "--json"]);
    assert_eq!(o.status.code(), Some(4));
    let v = assert_schema("validate", &stdout(&o));
    assert_eq!(v["passed"], false);
    let o = run(&["validate", "--suite", "gaussian-ab", "--fault", "corrupted-closed-form"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("FAIL"));
    assert!(stdout(&o).contains("lhs="), "worst offenders listed");
    let a = run(&["validate", "--suite", "slope", "--grid-seed", "3"]);
    let b = run(&["validate", "--suite", "slope", "--grid-seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(run(&["validate", "--suite", "nope"]).status.code(), Some(2));
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn curve_export() {
    let o = run(&with(&["curve", "--sweep", "sigma=0.5:5:0.5"], &GAUSS));
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), truncdp::cli::CURVE_HEADER);
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 10 * 70);
    for r in &rows {
        let trunc: f64 = r[2].parse().unwrap();
        let untrunc: f64 = r[3].parse().unwrap();
        assert!(trunc <= untrunc + 1e-12, "{r:?}");
        // Printing the parsed value reproduces the field exactly.
        assert_eq!(format!("{trunc:.16e}"), r[2]);
        let alpha = RenyiOrder::new(r[0].parse().unwrap()).unwrap();
        assert_eq!(rdp_to_dp(trunc, alpha, 1e-5).unwrap(), r[4].parse::<f64>().unwrap());
    }

    let single = run(&with(&["curve", "--alpha-grid", "2,4,8", "--json"], &GAUSS));
    let v = assert_schema("curve", &stdout(&single));
    let rdp = run(&with(&["rdp", "--alpha-grid", "2,4,8", "--json"], &GAUSS));
    let r: Value = serde_json::from_slice(&rdp.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["rdp_truncated"], r["rdp"][i]);
        assert_eq!(row["rdp_untruncated"], r["rdp_untruncated"][i]);
        assert_eq!(row["case"], r["case_tags"][i]);
    }

    let o = run(&with(&["curve", "--sweep", "interval=-1:2,0:1,3:4", "--alpha-grid", "2"], &GAUSS));
    assert_eq!(parse_csv(&stdout(&o)).len(), 3);
    let o = run(&["curve", "--mechanism", "laplace", "--lambda", "1", "--a", "0", "--b", "1", "--sweep", "lambda=1:2:0.5", "--alpha-grid", "2"]);
    assert_eq!(parse_csv(&stdout(&o)).len(), 3);

    for bad in ["sigma=1:0:1", "sigma=1:2", "sigma", "lambda=1:2:1", "interval=1", "interval=2:1", "depth=1"] {
        let o = run(&with(&["curve", "--sweep", bad], &GAUSS));
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn alpha_grid_flag() {
    assert_eq!(run(&with(&["rdp", "--alpha-grid", "1,2"], &GAUSS)).status.code(), Some(2));
    assert_eq!(run(&with(&["rdp", "--alpha-grid", "2,x"], &GAUSS)).status.code(), Some(2));
    let o = run(&with(&["rdp", "--alpha-grid", "3,2,2", "--json"], &GAUSS));
    let v = assert_schema("rdp", &stdout(&o));
    let grid: Vec<f64> = alpha_grid(&[3.0, 2.0, 2.0]).unwrap().iter().map(|a| a.value()).collect();
    let printed: Vec<f64> = v["alpha_grid"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(printed, grid);
}
