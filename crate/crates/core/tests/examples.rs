//! Runs every example binary so they cannot rot. `cargo test` builds the
//! examples next to the test executables.

use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> String {
    let deps = std::env::current_exe().unwrap();
    let dir: PathBuf = deps.parent().unwrap().parent().unwrap().join("examples");
    let bin = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    let out = Command::new(&bin).output().unwrap_or_else(|e| panic!("{}: {e}", bin.display()));
    assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn clovertree_scores() {
    let out = example("clovertree_scores");
    for s in ["72%", "85%", "61%", "74%", "23%", "28%", "18%", "26%"] {
        assert!(out.contains(s), "{s}");
    }
}

#[test]
fn baseline_policies() {
    let out = example("baseline_policies");
    assert!(out.contains("best_in_study(SYCL)"));
    assert!(out.contains("reference_implementation(HIP)"));
    assert!(out.contains("repository_best(CUDA)"));
}

#[test]
fn criterion4_audit() {
    let out = example("criterion4_audit");
    assert!(out.contains("3 violation(s)"));
    assert!(out.contains("no findings"));
}

#[test]
fn architectural_efficiency() {
    assert!(example("architectural_efficiency").contains("architectural_roofline"));
}

#[test]
fn harmonic_vs_arithmetic() {
    assert!(example("harmonic_vs_arithmetic").contains("harmonic 0.0000"));
}

#[test]
fn repository_recalculation() {
    assert!(example("repository_recalculation").contains("identical state"));
}

#[test]
fn serve_repository() {
    assert!(example("serve_repository").contains("0.233333333333"));
}
