use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    path.display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uda")).args(args).output().expect("uda runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "uda {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

type CsvRow = Vec<(String, String)>;

/// Parses sectioned CSV into `table -> rows of (column, text)`.
fn csv_tables(text: &str) -> Vec<(String, Vec<CsvRow>)> {
    let mut tables: Vec<(String, Vec<CsvRow>)> = Vec::new();
    let mut header: Option<Vec<String>> = None;
    for line in text.lines() {
        if let Some(name) = line.strip_prefix("# table: ") {
            tables.push((name.to_string(), Vec::new()));
            header = None;
        } else if line.starts_with('#') {
            continue;
        } else if let Some(cols) = &header {
            let row = cols.iter().cloned().zip(line.split(',').map(str::to_string)).collect();
            tables.last_mut().unwrap().1.push(row);
        } else {
            header = Some(line.split(',').map(str::to_string).collect());
        }
    }
    tables
}

fn cell_matches(json: &Value, text: &str) -> bool {
    match json {
        Value::Null => text.is_empty(),
        Value::String(s) => s == text,
        Value::Number(n) => text.parse::<f64>().ok() == n.as_f64(),
        Value::Bool(b) => text == b.to_string(),
        _ => false,
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn point_mass_class_has_no_uncertainty() {
    let v = json(&["analyze", &fixture("point_mass.json")]);
    let summary = &v["result"]["summary"][0];
    assert_eq!(num(&summary["r_star_inf"]), 0.0);
    assert_eq!(num(&summary["ptlu"]), 0.0);
    for row in v["result"]["observations"].as_array().unwrap() {
        assert_eq!(num(&row["e_star"]), 0.0);
        assert_eq!(num(&row["ptlu"]), 0.0);
    }
}

#[test]
fn example1_files_reproduce_their_risks() {
    let c1 = json(&["analyze", &fixture("example1_class1.json")]);
    assert_eq!(num(&c1["result"]["summary"][0]["r_star_inf"]), 0.0);
    assert_eq!(num(&c1["result"]["summary"][0]["ptlu"]), 0.0);
    let c2 = json(&["analyze", &fixture("example1_class2.json")]);
    let r = num(&c2["result"]["summary"][0]["r_star_inf"]);
    assert!((r - 0.125).abs() < 0.02, "r_star_inf = {r}");
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        vec!["bounds", "--trials", "200", "--seed", "11"],
        vec!["sample", "--m", "7", "--n", "4", "--seed", "3"],
        vec!["posterior", "--m", "3", "--n", "2", "--seed", "5", "--format", "csv"],
    ] {
        let mut full = args.clone();
        let file = fixture("ambiguous.json");
        full.insert(1, &file);
        assert_eq!(stdout(&full), stdout(&full), "uda {full:?}");
    }
}

#[test]
fn csv_and_json_carry_the_same_values() {
    let file = fixture("ambiguous.json");
    for cmd in [vec!["analyze"], vec!["posterior", "--m", "2", "--n", "2"], vec!["measures"]] {
        let mut args = cmd.clone();
        args.push(&file);
        let v = json(&args);
        args.extend(["--format", "csv"]);
        let tables = csv_tables(&stdout(&args));
        let result = v["result"].as_object().unwrap();
        assert_eq!(tables.len(), result.len());
        for (name, rows) in &tables {
            let jrows = result[name].as_array().unwrap();
            assert_eq!(rows.len(), jrows.len(), "table {name}");
            for (row, jrow) in rows.iter().zip(jrows) {
                for (col, text) in row {
                    assert!(cell_matches(&jrow[col], text), "{name}.{col}: {} vs {text:?}", jrow[col]);
                }
            }
        }
    }
}

#[test]
fn disjoint_supports_give_infinite_kl_in_csv() {
    let out = stdout(&["measures", &fixture("example1_class1.json"), "--which", "kl", "--format", "csv"]);
    assert!(out.lines().any(|l| l.starts_with("kl,Infinity,")), "{out}");
}

#[test]
fn empty_samples_are_allowed() {
    let v = json(&["sample", &fixture("ambiguous.json"), "--m", "0", "--n", "0"]);
    assert!(v["result"]["source"].as_array().unwrap().is_empty());
    assert!(v["result"]["target"].as_array().unwrap().is_empty());
}

#[test]
fn bounds_hold_on_every_trial() {
    let v = json(&["bounds", &fixture("ambiguous.json"), "--trials", "1000"]);
    let s = &v["result"]["summary"][0];
    assert_eq!(num(&s["trials"]), 1000.0);
    assert_eq!(num(&s["fano_violations"]), 0.0);
    assert_eq!(num(&s["g_bound_mass_violations"]), 0.0);
    assert!(num(&s["min_fano_slack"]) >= -1e-9);
}

#[test]
fn natural_log_rescales_entropy() {
    let file = fixture("ambiguous.json");
    let bits = num(&json(&["analyze", &file])["result"]["summary"][0]["ptlu"]);
    let nats = num(&json(&["analyze", &file, "--log-base", "e"])["result"]["summary"][0]["ptlu"]);
    assert!((bits * std::f64::consts::LN_2 - nats).abs() < 1e-9);
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let file = fixture("point_mass.json");
    let printed = stdout(&["analyze", &file]);
    assert!(stdout(&["analyze", &file, "--out", path.to_str().unwrap()]).is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), printed);
}

#[test]
fn exported_example_class_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("class.json");
    let p = path.to_str().unwrap();
    stdout(&["examples", "--id", "3", "--class", "2", "--resolution", "16", "--export-class", p]);
    let v = json(&["analyze", p]);
    assert!(num(&v["result"]["summary"][0]["r_star_inf"]) > 0.0);
}

#[test]
fn exit_codes_separate_bad_input_from_failed_computation() {
    assert_eq!(run(&["analyze", &fixture("invalid.json")]).status.code(), Some(1));
    assert_eq!(run(&["analyze", &fixture("missing.json")]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["measures", &fixture("ambiguous.json"), "--which", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["examples", "--id", "1", "--resolution", "12"]).status.code(), Some(1));
    let zero = run(&[
        "posterior",
        &fixture("point_mass.json"),
        "--sample",
        &fixture("contradicting_sample.json"),
    ]);
    assert_eq!(zero.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&zero.stderr).starts_with("error:"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
