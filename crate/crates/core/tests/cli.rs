use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cube-witness"));
    c.env_remove("CUBE_WITNESS_MODE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(v: &Value) {
    let val = validator();
    if let Err(e) = val.validate(v) {
        panic!("report violates schema: {e}");
    }
}

fn without_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time");
    v
}

#[test]
fn every_command_emits_a_valid_report() {
    let cases: &[&[&str]] = &[
        &["witness", "--n", "11", "--m", "2"],
        &["--mode", "float", "witness", "--n", "101", "--m", "1"],
        &["l1", "--n", "9", "--m", "2", "--rho", "0.25"],
        &["family", "--n", "21", "--m", "1", "--size", "20", "--seed", "3"],
        &["sq", "--n", "9", "--m", "1", "--family-size", "10", "--tau", "0.01"],
        &["learn", "--n", "7", "--m", "1", "--samples", "400", "--seeds", "2"],
        &["identities", "--max-index", "64"],
    ];
    for args in cases {
        let out = run(args);
        let v = report(&out);
        assert_valid(&v);
        assert_eq!(
            v["command"],
            args.iter()
                .find(|a| !a.starts_with('-') && **a != "float")
                .copied()
                .unwrap()
        );
        let code = out.status.code().unwrap();
        let passed = v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true);
        assert_eq!(code == 0, passed, "{args:?}: exit {code}");
        assert!(code == 0 || code == 1);
    }
}

#[test]
fn identities_pass_by_default_scale() {
    let out = run(&["identities", "--max-index", "256", "--slope-tol", "0.1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn reports_are_reproducible() {
    let args = ["learn", "--n", "7", "--m", "1", "--samples", "300", "--seed", "9"];
    let a = without_time(report(&run(&args)));
    let b = without_time(report(&run(&args)));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let sq = ["sq", "--n", "9", "--m", "1", "--family-size", "12", "--seed", "4"];
    assert_eq!(without_time(report(&run(&sq))), without_time(report(&run(&sq))));
}

#[test]
fn usage_and_domain_errors_exit_two() {
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["witness", "--n", "9"]).status.code(), Some(2));
    assert_eq!(
        run(&["l1", "--n", "9", "--m", "1", "--rho", "abc"]).status.code(),
        Some(2)
    );
    let even = run(&["witness", "--n", "14", "--m", "2"]);
    assert_eq!(even.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&even.stderr).contains("odd"));
    assert_eq!(
        run(&["l1", "--n", "9", "--m", "1", "--rho", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn budget_exhaustion_exits_four() {
    let out = run(&[
        "family", "--n", "9", "--m", "1", "--size", "50", "--delta", "0.2", "--budget", "100",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn mode_comes_from_the_environment_unless_overridden() {
    let out = bin()
        .env("CUBE_WITNESS_MODE", "float")
        .args(["l1", "--n", "9", "--m", "1"])
        .output()
        .unwrap();
    assert_eq!(report(&out)["results"]["mode"], "float");
    let out = bin()
        .env("CUBE_WITNESS_MODE", "float")
        .args(["--mode", "exact", "l1", "--n", "9", "--m", "1"])
        .output()
        .unwrap();
    assert_eq!(report(&out)["results"]["mode"], "exact");
    let out = bin()
        .env("CUBE_WITNESS_MODE", "quad")
        .args(["l1", "--n", "9", "--m", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rho_is_parsed_exactly() {
    let a = report(&run(&["witness", "--n", "9", "--m", "1", "--rho", "0.3"]));
    let b = report(&run(&["witness", "--n", "9", "--m", "1", "--rho", "3/10"]));
    assert_eq!(a["results"]["kappa"]["rho"], "3/10");
    assert_eq!(a["results"]["kappa"]["value"], b["results"]["kappa"]["value"]);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&["witness", "--n", "9", "--m", "1", "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_valid(&v);
}

#[test]
fn sweep_writes_csv_and_resumes_from_its_log() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    let log = dir.path().join("cells.jsonl");
    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    std::fs::write(
        &grid,
        "command: witness\n# kappa versus n\nn: 9, 11, 13\nm: 2\nrho: 1/2\n",
    )
    .unwrap();
    let args = |csv: &Path| {
        vec![
            "sweep".to_string(),
            grid.to_str().unwrap().into(),
            "--log".into(),
            log.to_str().unwrap().into(),
            "--jobs".into(),
            "2".into(),
            "-o".into(),
            csv.to_str().unwrap().into(),
        ]
    };
    let first = bin().args(args(&csv1)).output().unwrap();
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(String::from_utf8_lossy(&first.stderr).contains("3 cells computed"));

    let mut rd = csv::Reader::from_path(&csv1).unwrap();
    let header = rd.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let kappas: Vec<f64> = rows
        .iter()
        .map(|r| r[col("result.kappa.value_f64")].parse().unwrap())
        .collect();
    assert!(kappas.iter().all(|k| *k > 0.0));
    assert!(rows.iter().all(|r| &r[col("status")] == "pass"));

    // a 1-cell grid matches a direct run
    let direct = report(&run(&["witness", "--n", "11", "--m", "2", "--rho", "1/2"]));
    assert_eq!(
        rows[1][col("result.kappa.value")],
        *direct["results"]["kappa"]["value"].as_str().unwrap()
    );

    let second = bin().args(args(&csv2)).output().unwrap();
    assert!(String::from_utf8_lossy(&second.stderr).contains("0 cells computed, 3 resumed"));
    assert_eq!(std::fs::read(&csv1).unwrap(), std::fs::read(&csv2).unwrap());
}

#[test]
fn sweep_marks_failed_cells_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    std::fs::write(&grid, "command: witness\nn: 9, 10, 11\nm: 1\n").unwrap();
    let out = run(&["sweep", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    let header = rd.headers().unwrap().clone();
    let status = header.iter().position(|h| h == "status").unwrap();
    let got: Vec<String> = rd.records().map(|r| r.unwrap()[status].to_string()).collect();
    assert_eq!(got, ["pass", "error", "pass"]);
}
