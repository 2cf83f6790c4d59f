use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pitspec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pitspec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate(dir: &Path, model: &str, params: &str, n: usize, seed: u64, file: &str) {
    let n = n.to_string();
    let seed = seed.to_string();
    ok(&pitspec(
        dir,
        &["simulate", "--model", model, "--params", params, "--n", &n, "--seed", &seed, "--out", file],
    ));
}

#[test]
fn simulate_then_estimate_recovers_parameters() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate(dir, "garch11-n", "0,0.1,0.1,0.8", 2000, 3, "y.csv");
    let out = pitspec(dir, &["estimate", "--data", "y.csv", "--model", "garch11-n", "--out", "est.json"]);
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("GARCH") && table.contains("ARCH") && table.contains("Variance const"));

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("est.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let p = &report["fit"]["params"];
    let se = report["fit"]["std_errors"].as_array().unwrap();
    let est = [&p["mean_const"], &p["omega"], &p["alpha"], &p["beta"]];
    for ((e, s), truth) in est.iter().zip(se).zip([0.0, 0.1, 0.1, 0.8]) {
        let (e, s) = (e.as_f64().unwrap(), s.as_f64().unwrap());
        assert!((e - truth).abs() <= 3.0 * s, "estimate {e} vs {truth} (se {s})");
    }
}

#[test]
fn test_command_writes_report_and_table() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate(dir, "garch11-n", "0,0.1,0.1,0.8", 1000, 12, "y.csv");
    let args = ["test", "--data", "y.csv", "--model", "garch11-n", "--B", "99", "--seed", "4", "--out", "rep"];
    ok(&pitspec(dir, &args));
    let json = fs::read(dir.join("rep.json")).unwrap();
    let txt = fs::read_to_string(dir.join("rep.txt")).unwrap();

    let report: Value = serde_json::from_slice(&json).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["B"], 99);
    let names: Vec<&str> = report["statistics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["cvm1", "adj:1", "adj:5", "ks1", "mdj:1", "mdj:5"]);
    for s in report["statistics"].as_array().unwrap() {
        let p = s["p_value"].as_f64().unwrap();
        assert!(p > 0.01, "{}: p-value {p} on null data", s["name"]);
        assert!(s["critical_values"]["0.05"].as_f64().unwrap() > 0.0);
    }
    let header = txt.lines().nth(1).unwrap();
    for label in ["D1n^CvM", "ADJ_1n", "ADJ_5n", "D1n^KS", "MDJ_1n", "MDJ_5n"] {
        assert!(header.contains(label), "missing column {label}");
    }

    // Same flags, same bytes.
    ok(&pitspec(dir, &args));
    assert_eq!(fs::read(dir.join("rep.json")).unwrap(), json);
    assert_eq!(fs::read_to_string(dir.join("rep.txt")).unwrap(), txt);
}

#[test]
fn autocorrelogram_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate(dir, "ar1-garch11-n", "0,0.5,0.1,0.1,0.8", 400, 8, "y.csv");
    let args = [
        "autocorrelogram", "--data", "y.csv", "--model", "garch11-n", "--k", "4", "--B", "59", "--out", "ac",
    ];
    ok(&pitspec(dir, &args));
    let csv = fs::read_to_string(dir.join("ac.csv")).unwrap();
    let svg = fs::read_to_string(dir.join("ac.svg")).unwrap();

    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["lag", "statistic", "value", "cv10", "cv05", "cv01", "p_value"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    let num = |r: &csv::StringRecord, i: usize| r[i].parse::<f64>().unwrap();
    for (lag, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), lag);
        assert!(num(r, 2) >= 0.0);
        assert!(num(r, 3) <= num(r, 4) && num(r, 4) <= num(r, 5));
    }
    // Lag-1 dependence left in the mean is flagged by the lag-1 bar.
    assert!(num(&rows[1], 2) > num(&rows[1], 4), "lag-1 bar below its 5% marker");

    assert!(svg.starts_with("<svg") && svg.contains("xmlns"));
    assert!(!svg.contains("href"));
    for glyph in [">X<", ">V<", ">I<"] {
        assert_eq!(svg.matches(glyph).count(), 5);
    }
    ok(&pitspec(dir, &args));
    assert_eq!(fs::read_to_string(dir.join("ac.svg")).unwrap(), svg);
    assert_eq!(fs::read_to_string(dir.join("ac.csv")).unwrap(), csv);
}

#[test]
fn mc_plan_to_csv() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("plan.txt"),
        "null_model = garch11-n\ndgp_model = ar1-garch11-n\nalpha1 = 0.4\nn = 80\nreps = 1\n\
         method = warp\nstatistics = adj0:1\nseed = 9\n",
    )
    .unwrap();
    ok(&pitspec(dir, &["mc", "--plan", "plan.txt", "--out", "power.csv"]));
    let csv = fs::read_to_string(dir.join("power.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "alpha1,n,statistic,level,rate,reps,method,failures");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[2], "adj0:1");
        let rate: f64 = f[4].parse().unwrap();
        assert!(rate == 0.0 || rate == 1.0, "rate {rate}");
    }

    fs::write(dir.join("bad.txt"), "null_model = garch11-n\nalpha1 = 0.0\n").unwrap();
    let out = pitspec(dir, &["mc", "--plan", "bad.txt", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing field"));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("empty.csv"), "").unwrap();
    fs::write(dir.join("header_only.csv"), "date,ret\n").unwrap();
    fs::write(dir.join("garbage.csv"), "0.1\n0.2\nNaN-ish\n").unwrap();
    fs::write(dir.join("flat.csv"), "0.5\n".repeat(100)).unwrap();
    simulate(dir, "garch11-n", "0,0.1,0.1,0.8", 200, 1, "y.csv");

    let code = |args: &[&str]| pitspec(dir, args).status.code();
    assert_eq!(code(&["test", "--data", "empty.csv"]), Some(2));
    assert_eq!(code(&["test", "--data", "header_only.csv"]), Some(2));
    assert_eq!(code(&["estimate", "--data", "garbage.csv"]), Some(2));
    assert_eq!(code(&["estimate", "--data", "missing.csv"]), Some(2));
    assert_eq!(code(&["test", "--data", "y.csv", "--model", "egarch"]), Some(5));
    assert_eq!(code(&["estimate", "--data", "flat.csv"]), Some(3));
    assert_eq!(code(&["test", "--data", "y.csv", "--B", "0"]), Some(2));
    assert_eq!(code(&["simulate", "--params", "0,0.1,0.5,0.6", "--n", "10"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn dated_input_is_accepted() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate(dir, "garch11-n", "0,0.1,0.1,0.8", 300, 2, "y.csv");
    let values: Vec<String> = fs::read_to_string(dir.join("y.csv")).unwrap().lines().skip(1).map(String::from).collect();
    let dated: String = std::iter::once("date,return".to_string())
        .chain(values.iter().enumerate().map(|(i, v)| format!("2000-01-{:04},{v}", i)))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.join("dated.csv"), dated).unwrap();
    ok(&pitspec(dir, &["estimate", "--data", "y.csv", "--out", "a.json"]));
    ok(&pitspec(dir, &["estimate", "--data", "dated.csv", "--out", "b.json"]));
    assert_eq!(fs::read(dir.join("a.json")).unwrap(), fs::read(dir.join("b.json")).unwrap());
}
