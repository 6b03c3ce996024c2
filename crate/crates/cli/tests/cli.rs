use std::path::Path;
use std::process::Command;

use occupancy_cli::run;
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("occupancy").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = invoke(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).unwrap()
}

fn assert_valid(name: &str, text: &str) -> Value {
    let doc: Value = serde_json::from_str(text).unwrap();
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{text}");
    doc
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn moments_example() {
    let rows = csv_rows(&ok(&["moments", "--n", "4", "--m", "2", "--d", "2", "--exact"]));
    assert_eq!(rows[0], ["n", "m", "d", "mu", "sigma2", "r", "mu_exact", "sigma2_exact"]);
    let mu: f64 = rows[1][3].parse().unwrap();
    let s2: f64 = rows[1][4].parse().unwrap();
    assert!((mu - 0.75).abs() < 1e-15);
    assert_eq!(s2, 0.9375);
    assert_eq!(rows[1][6], "3/4");
    assert_eq!(rows[1][7], "15/16");
    let doc = assert_valid("moments", &ok(&["moments", "--n", "4", "--m", "2", "--d", "2", "--exact", "--atoms", "--format", "json"]));
    assert!((doc["r"].as_f64().unwrap() - 0.10758).abs() < 1e-5);
}

#[test]
fn kolmogorov_example() {
    let doc = assert_valid("kolmogorov", &ok(&["kolmogorov", "--n", "4", "--m", "2", "--d", "2", "--format", "json"]));
    assert!((doc["d_k"].as_f64().unwrap() - 0.4057).abs() < 1e-3);
    assert!((doc["lower_bound"].as_f64().unwrap() - 0.029).abs() < 1e-12);
    let float = assert_valid("kolmogorov", &ok(&["kolmogorov", "--n", "4", "--m", "2", "--d", "2", "--mode", "float", "--format", "json"]));
    assert!((float["d_k"].as_f64().unwrap() - doc["d_k"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn pmf_examples() {
    let out = ok(&["pmf", "--n", "0", "--m", "3", "--d", "0"]);
    assert!(out.starts_with("# occupancy-pmf v1"));
    assert_eq!(csv_rows(&out), [["k", "probability_numerator", "probability_denominator"], ["3", "1", "1"]]);
    let doc = assert_valid("pmf", &ok(&["pmf", "--n", "4", "--m", "2", "--d", "2", "--size-biased", "--format", "json"]));
    assert_eq!(doc["atoms"].as_array().unwrap().len(), 1);
    assert_eq!(doc["atoms"][0]["k"], 2);
    assert_valid("pmf", &ok(&["pmf", "--n", "30", "--m", "10", "--d", "2", "--mode", "float", "--format", "json"]));
    let (code, _, err) = invoke(&["pmf", "--n", "200", "--m", "200", "--d", "2", "--mode", "exact"]);
    assert_eq!(code, 1);
    assert!(err.contains("float mode"), "{err}");
}

#[test]
fn domain_and_starr() {
    let doc = assert_valid("domain", &ok(&["domain", "--n", "100", "--m", "100", "--d", "2", "--format", "json"]));
    assert_eq!(doc["label"], "central");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.csv");
    std::fs::write(&path, "1,2\n2,1\n").unwrap();
    let p = path.to_str().unwrap();
    let doc = assert_valid("starr", &ok(&["starr", "--counts", p, "--n0", "2", "--format", "json"]));
    assert!((doc["estimate"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);

    std::fs::write(&path, "").unwrap();
    let (code, _, err) = invoke(&["starr", "--counts", p, "--n0", "1"]);
    assert_eq!(code, 1, "{err}");

    std::fs::write(&path, "1,2\nx,1\n").unwrap();
    let (code, _, err) = invoke(&["starr", "--counts", p, "--n0", "1"]);
    assert_eq!(code, 2);
    assert!(err.contains(":2:"), "{err}");

    let (code, _, _) = invoke(&["starr", "--counts", dir.path().join("missing").to_str().unwrap(), "--n0", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn couple_reports_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("draws.jsonl");
    let args = ["couple", "--n", "10", "--m", "5", "--d", "2", "--samples", "20000", "--format", "json", "--dump", dump.to_str().unwrap(), "--dump-count", "5"];
    let doc = assert_valid("couple", &ok(&args));
    assert!(doc["tv_y"].as_f64().unwrap() < 0.02);
    assert_eq!(doc["k_violations"], 0);
    let lines: Vec<Value> = std::fs::read_to_string(&dump).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].get("m").is_none());
    assert_eq!(ok(&args), ok(&args));
    let (code, _, err) = invoke(&["couple", "--n", "10", "--m", "5", "--d", "2", "--samples", "999"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn scan_single_point_matches_kolmogorov() {
    let doc = assert_valid("scan", &ok(&["scan", "--n", "4", "--m", "2", "--d", "2", "--format", "json"]));
    let k = assert_valid("kolmogorov", &ok(&["kolmogorov", "--n", "4", "--m", "2", "--d", "2", "--format", "json"]));
    assert_eq!(doc["rows"][0]["d_k"], k["d_k"]);
    assert_eq!(doc["rows"][0]["mode"], "exact");
}

#[test]
fn scan_csv_layout_and_errors() {
    let out = ok(&["scan", "--d", "3", "--m-values", "1,20", "--ratios", "4,5"]);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# occupancy-scan v1"));
    assert_eq!(lines.next().unwrap(), occupancy_cli::SCAN_COLUMNS.join(","));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1 + 4);
    let err_col = rows[0].iter().position(|c| c == "error").unwrap();
    assert!(!rows[1][err_col].is_empty());
    assert!(!rows[2][err_col].is_empty());
    assert!(rows[3][err_col].is_empty());
    assert!(out.trim_end().lines().last().unwrap().starts_with("# rows=4 errors=2"));
}

#[test]
fn scan_uses_all_tiers() {
    let doc = assert_valid(
        "scan",
        &ok(&["scan", "--d", "2", "--m-values", "100,400,1200", "--ratios", "1", "--samples", "2000", "--format", "json"]),
    );
    let modes: Vec<&str> = doc["rows"].as_array().unwrap().iter().map(|r| r["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["exact", "float", "mc"]);
    assert!(doc["rows"][2]["d_k_se"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_json_validates() {
    let doc = assert_valid("verify", &ok(&["verify", "--suite", "corollary", "--format", "json"]));
    assert_eq!(doc["pass"], true);
    let doc = assert_valid(
        "verify",
        &ok(&["verify", "--suite", "efron-stein", "--es-n", "20", "--es-m", "10", "--samples", "20000", "--format", "json"]),
    );
    assert_eq!(doc["suites"]["efron-stein"]["pass"], true);
    let (code, _, _) = invoke(&["verify", "--suite", "corollary", "--sequence-d", "3", "--strict"]);
    assert_eq!(code, 1);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(invoke(&[]).0, 2);
    assert_eq!(invoke(&["bogus"]).0, 2);
    assert_eq!(invoke(&["moments", "--n", "x", "--m", "2", "--d", "1"]).0, 2);
    assert_eq!(invoke(&["scan", "--m-range", "10:5:1"]).0, 2);
    assert_eq!(invoke(&["--help"]).0, 0);
    let (code, _, err) = invoke(&["moments", "--n", "1", "--m", "2", "--d", "3"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let out = ok(&["moments", "--n", "4", "--m", "2", "--d", "2", "--output", path.to_str().unwrap()]);
    assert!(out.is_empty());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("n,m,d,mu"));
}

#[test]
fn binary_honours_thread_override() {
    let bin = env!("CARGO_BIN_EXE_occupancy");
    let args = ["scan", "--d", "2", "--m-values", "20,40,160", "--ratios", "0.5,2", "--samples", "2000"];
    let one = Command::new(bin).args(args).env("OCCUPANCY_THREADS", "1").output().unwrap();
    let four = Command::new(bin).args(args).env("OCCUPANCY_THREADS", "4").output().unwrap();
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let bad = Command::new(bin).args(["moments", "--n", "1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
