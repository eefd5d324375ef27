use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn taxlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taxlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(dir: &Path, value: serde_json::Value) -> Output {
    let cfg = write_config(dir, value);
    taxlab(&["run", "--config", &cfg])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn measure_reports_the_warmup_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), json!({"mechanism": {"id": "warmup", "params": {"c": 2}}, "suites": ["measure"], "outputs": {"dir": "out"}}));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "mechanism,m,n,tax,cc,price,tie,mc,val,dem,d,valid");
    assert_eq!(lines.len(), 2);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((row[0], row[3], row[4], row[11]), ("warmup", "2", "3", "true"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["tax"], 2);
}

#[test]
fn theorem_check_prints_one_line_per_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        json!({"library": {"m": 4}, "mechanisms": [{"id": "value_tightness", "params": {"c": 2}}], "suites": ["theorem-check"], "outputs": {"dir": "out"}}),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("drop_tie tax<=cc: PASS"));
    assert!(text.contains("value_tightness mc<=val+2: PASS"));
    assert!(!text.contains("FAIL"));
    assert!(text.contains("suite theorem-check: PASS"));
}

#[test]
fn empty_suite_list_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), json!({"mechanism": {"id": "warmup", "params": {"c": 1}}, "suites": [], "outputs": {"dir": "out"}}));
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        json!({"mechanism": {"id": "no_such_mechanism"}, "suites": ["measure"]}),
        json!({"mechanism": {"id": "warmup"}, "suites": ["measure"]}),
        json!({"mechanism": {"id": "warmup", "params": {"c": 1}, "catalogs": ["missing.json", "missing.json"]}, "suites": ["measure"]}),
        json!({"mechanism": {"id": "warmup", "params": {"c": 1}, "catalogs": [[]]}, "suites": ["measure"]}),
        json!({"mechanism": {"id": "warmup", "params": {"c": 1}}, "suites": ["no-such-suite"]}),
        json!({"suites": ["disjointness"]}),
        json!({"suites": ["measure"]}),
    ];
    for cfg in bad {
        let o = run(dir.path(), cfg.clone());
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        let path = write_config(dir.path(), cfg.clone());
        assert_eq!(taxlab(&["validate", "--config", &path]).status.code(), Some(2), "{cfg}");
    }
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), json!({"library": {"m": 2}, "suites": ["measure", "transform"]}));
    let o = taxlab(&["validate", "--config", &path]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("config ok"));
}

#[test]
fn catalogs_load_from_files_and_inline() {
    let dir = tempfile::tempdir().unwrap();
    let val = |x: &str| json!({"m": 2, "values": {"0": "0", "1": x, "2": "0", "3": x}});
    std::fs::write(dir.path().join("alice.json"), json!([val("1"), val("3/2")]).to_string()).unwrap();
    let bob = json!([{"m": 2, "values": {"0": "0", "1": "0", "2": "0", "3": "0"}}]);
    let o = run(
        dir.path(),
        json!({"mechanism": {"id": "warmup", "params": {"c": 2}, "catalogs": ["alice.json", bob]}, "suites": ["measure", "reconstruct-comm"], "outputs": {"dir": "out"}}),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    // two Alice valuations give Bob two menus
    assert!(csv.lines().nth(1).unwrap().starts_with("warmup,2,2,1,"));
}

#[test]
fn disjointness_suite_checks_instances() {
    let dir = tempfile::tempdir().unwrap();
    let inst = json!({"n": 2, "l": 3, "allowed": [["100", "011"], ["010", "101"]], "inputs": ["011", "010"], "z": 1});
    std::fs::write(dir.path().join("inst.json"), inst.to_string()).unwrap();
    let o = run(dir.path(), json!({"suites": ["disjointness"], "disjointness": [inst, "inst.json"], "outputs": {"dir": "out"}}));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/disjointness.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["correct"], true);
}

#[test]
fn broken_promise_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = json!({"n": 2, "l": 2, "allowed": [["11"], ["11"]], "inputs": ["11", "11"], "z": 1});
    let o = run(dir.path(), json!({"suites": ["disjointness"], "disjointness": [inst]}));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn artifacts_are_byte_stable_and_sorted() {
    let cfg = json!({
        "mechanisms": [
            {"id": "warmup", "params": {"c": 3}},
            {"id": "posted_prices", "params": {"prices": ["1", "2"], "players": 2}},
            {"id": "warmup", "params": {"c": 1}}
        ],
        "library": {"m": 2},
        "suites": ["measure", "reconstruct-comm", "verify-menu", "transform", "simultaneous"],
        "seed": 11,
        "outputs": {"dir": "out"}
    });
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), cfg.clone()).status.code(), Some(0));
    let cfg_b = write_config(b.path(), cfg);
    assert_eq!(taxlab(&["run", "--config", &cfg_b, "--jobs", "3"]).status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for name in names {
        let x = std::fs::read(a.path().join("out").join(&name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs between runs");
    }
    let csv = std::fs::read_to_string(a.path().join("out/report.csv")).unwrap();
    let keys: Vec<(String, usize, usize)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.iter().filter(|k| k.0 == "warmup").count(), 3);
}

#[test]
fn seed_and_out_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"library": {"m": 2}, "suites": ["reconstruct-comm"], "outputs": {"dir": "ignored"}}));
    let out = dir.path().join("elsewhere");
    let o = taxlab(&["run", "--config", &cfg, "--seed", "5", "--out", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("reconstruct_comm.json").exists());
    assert!(!dir.path().join("ignored").exists());
}
