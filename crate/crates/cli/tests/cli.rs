use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/euro2020.csv")
}

fn goalflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goalflow"))
        .args(args)
        .env_remove("GOALFLOW_DATA")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = goalflow(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_data(args: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    v.push(data().display().to_string());
    v
}

fn json(args: &[&str]) -> Value {
    let mut a = with_data(args);
    a.extend(["--format".into(), "json".into()]);
    let refs: Vec<&str> = a.iter().map(String::as_str).collect();
    serde_json::from_str(&stdout(&refs)).unwrap()
}

fn text(args: &[&str]) -> String {
    let a = with_data(args);
    let refs: Vec<&str> = a.iter().map(String::as_str).collect();
    stdout(&refs)
}

fn collect(v: &Value, numbers: &mut Vec<f64>, strings: &mut Vec<String>) {
    match v {
        Value::Number(n) => numbers.push(n.as_f64().unwrap()),
        Value::String(s) => strings.push(s.clone()),
        Value::Array(a) => a.iter().for_each(|x| collect(x, numbers, strings)),
        Value::Object(m) => {
            for (k, x) in m {
                strings.push(k.clone());
                collect(x, numbers, strings);
            }
        }
        _ => {}
    }
}

// Every number printed in text form appears in the JSON, up to the
// printed rounding, or inside a JSON string or key.
fn assert_text_numbers_in_json(args: &[&str]) {
    let t = text(args);
    let j = json(args);
    let (mut numbers, mut strings) = (Vec::new(), Vec::new());
    collect(&j, &mut numbers, &mut strings);
    let bytes = t.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if !bytes[i].is_ascii_digit() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        let token = t[start..i].trim_end_matches('.');
        let value: f64 = token.parse().unwrap();
        let decimals = token.split_once('.').map_or(0, |(_, d)| d.len());
        let tol = 0.5 * 10f64.powi(-(decimals as i32)) + 1e-12;
        let found = numbers.iter().any(|&n| (n.abs() - value).abs() <= tol)
            || strings.iter().any(|s| s.contains(token));
        assert!(found, "{args:?}: {token} from text not in JSON");
    }
}

#[test]
fn summary_headline() {
    let t = text(&["summary"]);
    assert!(
        t.contains("matches: 51, goals: 142, mean 2.65/match (normal time)"),
        "{t}"
    );
    let j = json(&["summary"]);
    assert_eq!(j["matches"], 51);
    assert_eq!(j["normal_time_goals"], 135);
    assert_eq!(j["exposure_minutes"], 4830);
}

#[test]
fn extra_time_exact_dispersion() {
    let t = text(&["dispersion", "--scope", "extra-time", "--exact"]);
    assert!(t.contains("D = 10.142857"), "{t}");
    assert!(t.contains("exact p = 0.2462"), "{t}");
    let j = json(&["dispersion", "--scope", "extra-time", "--exact"]);
    assert!((j["p_exact"].as_f64().unwrap() - 0.246).abs() < 0.005);
}

#[test]
fn dispersion_scopes_and_tails() {
    let j = json(&["dispersion"]);
    assert!((j["p_asymptotic"].as_f64().unwrap() - 0.636).abs() < 0.01);
    assert!(j["p_exact"].is_null());
    let j = json(&["dispersion", "--scope", "full-90", "--exact"]);
    assert_eq!(j["n"], 43);
    assert!((j["p_exact"].as_f64().unwrap() - 0.813).abs() < 0.02);
    let j = json(&[
        "dispersion",
        "--scope",
        "full-120",
        "--exact",
        "--tail",
        "lower",
    ]);
    assert_eq!(j["tail"], "lower");
    assert!(j["p_exact"].as_f64().unwrap() > 0.5);
    // Normal-time total 135 over 51 matches is within the exact limits.
    let j = json(&[
        "dispersion",
        "--scope",
        "normal",
        "--exact",
        "--tail",
        "two-sided",
    ]);
    assert_eq!(j["exact_flag"], true);
}

#[test]
fn gof_pooling_options() {
    let j = json(&["gof"]);
    assert!((j["statistic"].as_f64().unwrap() - 0.753).abs() < 0.05);
    assert_eq!(j["df"], 5);
    let j = json(&["gof", "--scope", "full"]);
    assert!((0.9..=1.2).contains(&j["statistic"].as_f64().unwrap()));
    let j = json(&["gof", "--pool-start", "5"]);
    assert_eq!(j["df"], 4);
    let j = json(&["gof", "--pool-min-expected", "5"]);
    assert!(j["cells"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["expected"].as_f64().unwrap() >= 5.0));
}

#[test]
fn gpfit_matches_reported_fit() {
    let j = json(&["gpfit"]);
    assert!((j["delta"].as_f64().unwrap() + 0.055).abs() < 0.01);
    assert!((j["p_one_sided"].as_f64().unwrap() - 0.299).abs() < 0.02);
    let j = json(&["gpfit", "--scope", "full", "--exposure"]);
    assert_eq!(j["exposure_adjusted"], true);
    assert!(j["loglik"].as_f64().unwrap() >= j["poisson_loglik"].as_f64().unwrap());
}

#[test]
fn survival_writes_plot() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("km.svg");
    let t = text(&["survival", "--plot", plot.to_str().unwrap()]);
    assert!(t.contains("Kaplan-Meier median: 24 min"), "{t}");
    assert!(t.contains("lambda 0.0294"), "{t}");
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let csv = text(&["survival", "--format", "csv"]);
    assert!(csv.starts_with("time,at_risk,events,censored,survival,std_err,exp_survival\n"));
}

#[test]
fn json_contains_every_text_number() {
    for args in [
        &["summary"][..],
        &["gof"],
        &["gof", "--scope", "full"],
        &["dispersion", "--exact"],
        &["dispersion", "--scope", "extra-time", "--exact"],
        &["gpfit"],
        &["gpfit", "--scope", "full", "--exposure"],
        &["survival"],
        &["simulate", "--replicates", "20"],
        &["report"],
    ] {
        assert_text_numbers_in_json(args);
    }
}

#[test]
fn output_is_deterministic() {
    for args in [
        &["report"][..],
        &["simulate", "--replicates", "20", "--seed", "5"],
    ] {
        for format in ["text", "json", "csv"] {
            let mut a = args.to_vec();
            a.extend(["--format", format]);
            assert_eq!(text(&a), text(&a), "{a:?}");
        }
    }
    let a = json(&["summary", "--stamp"]);
    assert!(a["generated_unix_seconds"].is_number());
    assert!(json(&["summary"]).get("generated_unix_seconds").is_none());
}

#[test]
fn simulate_seed_matters() {
    let a = json(&["simulate", "--replicates", "20", "--seed", "1"]);
    let b = json(&["simulate", "--replicates", "20", "--seed", "2"]);
    assert_ne!(a["quantiles"], b["quantiles"]);
    assert_eq!(a["seed"], 1);
    let csv = text(&["simulate", "--replicates", "20", "--format", "csv"]);
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let a = with_data(&["report", "--format", "json", "--out", out.to_str().unwrap()]);
    let refs: Vec<&str> = a.iter().map(String::as_str).collect();
    assert!(stdout(&refs).is_empty());
    let j: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(j["summary"]["matches"], 51);
    assert!(j["dispersion_extra_time"]["p_exact"].is_number());
}

#[test]
fn dataset_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_goalflow"))
        .arg("summary")
        .env("GOALFLOW_DATA", data())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("matches: 51"));
}

#[test]
fn exit_codes() {
    assert_eq!(goalflow(&["--help"]).status.code(), Some(0));
    assert_eq!(goalflow(&["--version"]).status.code(), Some(0));
    assert_eq!(goalflow(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(goalflow(&["summary"]).status.code(), Some(1));
    let d = data().display().to_string();
    assert_eq!(
        goalflow(&["dispersion", "--tail", "sideways", &d])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        goalflow(&["summary", "/definitely/missing.csv"])
            .status
            .code(),
        Some(2)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "match_id,stage,team_a,team_b,duration_min,goal_timeline\nM1,Group,X,Y,90,12:A\nM2,Group,X,Y,90,95:B\n",
    )
    .unwrap();
    let out = goalflow(&["summary", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}
