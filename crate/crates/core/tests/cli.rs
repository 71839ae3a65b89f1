use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppmetrics"))
        .args(args)
        .env_remove("PPMETRICS_STORE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const REFS: &str = "A100=CUDA,P100=CUDA,MI250=HIP";

#[test]
fn compute_study_best_table() {
    let o = run(&["compute", &data("three_models.csv")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for row in [("OpenACC", "72%"), ("OpenMP", "85%"), ("Kokkos", "61%")] {
        let line = out.lines().find(|l| l.starts_with(row.0)).unwrap();
        assert!(line.trim_end().ends_with(row.1), "{line}");
    }
}

#[test]
fn compute_fixed_reference_table() {
    let o = run(&["compute", &data("with_references.csv"), "--policy", "fixed-ref", "--reference", REFS]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("23%") && out.contains("28%") && out.contains("18%") && out.contains("26%"));
    assert!(!out.contains("CUDA "), "references are not scored");
}

#[test]
fn formats_agree_after_rounding() {
    let table = stdout(&run(&["compute", &data("with_sycl.csv")]));
    let csv = stdout(&run(&["compute", &data("with_sycl.csv"), "--format", "csv"]));
    let json = stdout(&run(&["compute", &data("with_sycl.csv"), "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for (i, line) in csv.lines().skip(1).enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let score: f64 = cells.last().unwrap().parse().unwrap();
        let pct = (score * 100.0 + 0.5 + 1e-9).floor() as i64;
        let row = table.lines().find(|l| l.starts_with(cells[0])).unwrap();
        assert!(row.trim_end().ends_with(&format!("{pct}%")), "{row} vs {score}");
        let from_json = v[i]["value"].as_f64().unwrap();
        assert!((from_json - score).abs() < 1e-11);
    }
}

#[test]
fn platform_set_restricts_and_warns() {
    let o = run(&["compute", &data("three_models.csv"), "--platforms", "A100,P100"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("MI250"));
    assert!(!stdout(&o).contains("MI250"));
}

#[test]
fn architectural_without_peaks_is_a_validation_error() {
    let o = run(&["compute", &data("three_models.csv"), "--policy", "arch-theoretical"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("peak_compute"));
}

#[test]
fn parse_errors_exit_1() {
    assert_eq!(run(&["compute", "/nonexistent.csv"]).status.code(), Some(1));
    assert_eq!(run(&["compute", &data("three_models.csv"), "--policy", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn fixed_reference_without_pairs_is_rejected() {
    let o = run(&["compute", &data("with_references.csv"), "--policy", "fixed-ref"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn audit_exit_codes() {
    let o = run(&["audit", "--before", &data("three_models.csv"), "--after", &data("with_sycl.csv")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("3 violation(s)"));

    let o = run(&[
        "audit",
        "--before",
        &data("three_models.csv"),
        "--after",
        &data("with_sycl.csv"),
        "--policy",
        "fixed-ref",
        "--reference",
        REFS,
        "--repository",
        &data("references.csv"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));

    let o = run(&["audit", "--before", &data("three_models.csv"), "--after", &data("three_models.csv")]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn audit_diff_strikes_through() {
    let o = run(&["audit", "--before", &data("three_models.csv"), "--after", &data("with_sycl.csv"), "--diff"]);
    assert!(stdout(&o).contains("~~72%~~ 67%"));
}

#[test]
fn audit_json_findings() {
    let o = run(&["audit", "--before", &data("three_models.csv"), "--after", &data("with_sycl.csv"), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let findings = v.as_array().unwrap();
    assert_eq!(findings.len(), 3);
    assert!(findings.iter().all(|f| f["platform"] == "MI250" && f["criterion"] == 4));
}

#[test]
fn import_report_and_atomicity() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let store = store.to_str().unwrap();

    let o = run(&["import", &data("three_models.csv"), "--store", store, "--define-policy", "study-best"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("ingested 9 measurement(s)"));

    let o = run(&["import", &data("three_models.csv"), "--store", store]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ingested 0"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "app,problem,implementation,model,platform,kind,value,compiler,compiler_flags,input_size\n\
         CloverTree,default,SYCL,SYCL,A100,runtime_seconds,50,,,\n\
         CloverTree,default,SYCL,SYCL,P100,runtime_seconds,0,,,\n",
    )
    .unwrap();
    let log = std::path::Path::new(store).join("events.log");
    let before = std::fs::read(&log).unwrap();
    let o = run(&["import", bad.to_str().unwrap(), "--store", store]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert_eq!(std::fs::read(&log).unwrap(), before);

    let o = Command::new(env!("CARGO_BIN_EXE_ppmetrics"))
        .args(["report", "--app", "CloverTree", "--problem", "default"])
        .env("PPMETRICS_STORE", store)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("85%"));
}

#[test]
fn serve_reports_corrupt_record() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().to_str().unwrap();
    assert_eq!(run(&["import", &data("three_models.csv"), "--store", store]).status.code(), Some(0));
    let log = dir.path().join("events.log");
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[6] = "{not json";
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();
    let o = run(&["serve", "--store", store, "--listen", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seq 7"), "{}", stderr(&o));
}
