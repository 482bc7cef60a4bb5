use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use higgs_core::scenario::BUNDLED;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_higgs-lab")).args(args).output().expect("spawn higgs-lab")
}

fn bundled_text(name: &str) -> &'static str {
    BUNDLED.iter().find(|(n, _)| *n == name).unwrap().1
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn list_scenarios_shows_every_bundled_name() {
    let out = lab(&["list-scenarios"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for (name, _) in BUNDLED {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
}

#[test]
fn run_writes_report_and_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let out = lab(&["run", "--scenario", "rank1-tstar-jacobian", "--out", out_dir.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_slice(&fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    for key in ["geometry", "family", "lambda", "G", "dG", "R", "pi", "nu", "chi", "residuals", "hyperkahler"] {
        assert!(report.get(key).is_some(), "report.json lacks {key}");
    }
    assert_eq!(report["pass"], serde_json::Value::Bool(true));

    let conv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().next(), Some("step,residual_sup,residual_l2,dt"));
    assert!(conv.lines().count() > 2);
    for f in ["G.csv", "pi.csv", "nu.csv", "verify.csv"] {
        assert!(out_dir.join(f).exists(), "{f} not written");
    }
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let sc = "rank1-pure-higgs";
    assert!(lab(&["run", "--scenario", sc, "--out", a.to_str().unwrap(), "--seed", "3"]).status.success());
    assert!(lab(&["run", "--scenario", sc, "--out", b.to_str().unwrap(), "--seed", "3", "--threads", "2"]).status.success());
    let (fa, fb) = (dir_contents(&a), dir_contents(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ca), (nb, cb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ca == cb, "{na} differs between runs");
    }
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    assert!(lab(&["run", "--scenario", "rank1-pure-higgs", "--out", out_dir.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out_dir.join("report.json")).unwrap();
    let re_lambda = text.lines().find(|l| l.trim_start().starts_with("\"lambda\"")).unwrap();
    let mantissa = re_lambda.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let digits = mantissa.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
    assert_eq!(digits, 17, "{re_lambda}");
}

#[test]
fn injected_fault_fails_the_adjointness_row() {
    let out = lab(&["verify", "--scenario", "rank1-tstar-jacobian", "--inject-fault", "dstar0"]);
    assert_eq!(out.status.code(), Some(1));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("FAIL") && l.contains("eq:dstar0")), "{table}");
}

#[test]
fn verify_passes_without_fault() {
    let out = lab(&["verify", "--scenario", "rank1-tstar-jacobian"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let o = out_dir.to_str().unwrap();

    assert_eq!(lab(&["run", "--scenario", "rank1-tstar-jacobian", "--out", o, "--tol-override", "tol_hym=-1"]).status.code(), Some(2));
    assert_eq!(lab(&["run", "--scenario", "rank1-tstar-jacobian", "--out", o, "--tol-override", "nonsense=1"]).status.code(), Some(2));
    assert_eq!(lab(&["run", "--scenario", "no-such-scenario", "--out", o]).status.code(), Some(2));
    assert_eq!(lab(&["run", "--scenario", "rank1-tstar-jacobian"]).status.code(), Some(2));

    let text = bundled_text("rank1-tstar-jacobian");
    let tasks_line = text.lines().find(|l| l.starts_with("tasks")).unwrap();
    let empty = tmp.path().join("empty.toml");
    fs::write(&empty, text.replace(tasks_line, "tasks = []")).unwrap();
    assert_eq!(lab(&["run", "--scenario", empty.to_str().unwrap(), "--out", o]).status.code(), Some(2));

    let unversioned = tmp.path().join("unversioned.toml");
    fs::write(&unversioned, text.replace("schema_version = 1", "")).unwrap();
    assert_eq!(lab(&["run", "--scenario", unversioned.to_str().unwrap(), "--out", o]).status.code(), Some(2));
}
