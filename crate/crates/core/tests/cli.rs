use std::process::Command;

use padic_lab::report::Status;
use padic_lab::suite::{Report, SuiteName};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_padic-lab"));
    c.env_remove("PADIC_LAB_OUT_DIR");
    c
}

#[test]
fn honda_suite_writes_a_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/honda.json");
    let out = bin()
        .args(["--suite", "honda", "--nmax", "1", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = Report::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report.config.p, 3);
    assert_eq!(report.config.n_max, 1);
    assert_eq!(report.config.precision, 30);
    assert_eq!(report.config.kappa_gamma, 4);
    assert_eq!((report.config.q.ord, report.config.q.unit), (1, 4));
    assert_eq!(report.config.suites, vec![SuiteName::Honda]);
    assert!(report.ok());
    assert!(report.checks.iter().all(|c| c.name.starts_with("honda.")));
    assert!(report.checks.iter().all(|c| c.millis.is_none()));
    let iota = report.check("honda.iota-integral").unwrap();
    assert!(iota.detail.contains("ι_2 = -1/2"), "{}", iota.detail);
}

#[test]
fn environment_sets_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("PADIC_LAB_OUT_DIR", dir.path())
        .args(["--suite", "mtt", "--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(text.contains("mtt.closed-form"));
    assert!(text.contains("0 failed"));
}

#[test]
fn text_report_goes_to_stdout_by_default() {
    let out = bin()
        .args(["--suite", "tate", "--nmax", "0"])
        .args(["--format", "text"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("p = 3, nmax = 0, N = 30"));
    assert!(text.contains("tate."));
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        vec!["--p", "4"],
        vec!["--p", "2"],
        vec!["--kappa-gamma", "10"],
        vec!["--q-unit", "6"],
        vec!["--q-ord", "0"],
        vec!["--prec", "3"],
        vec!["--l-ratio", "1/3"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    }
}

#[test]
fn unwritable_output_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = bin()
        .args(["--suite", "mtt", "--out"])
        .arg(blocker.join("report.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("i/o error"));
}

#[test]
fn unknown_suite_is_rejected() {
    let out = bin().args(["--suite", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let run = || {
        bin()
            .args(["--suite", "coleman", "--nmax", "1", "--seed", "7"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = Report::from_json(&String::from_utf8(a.stdout).unwrap()).unwrap();
    assert_eq!(report.config.seed, 7);
    assert!(report.checks.iter().all(|c| c.status == Status::Pass));
}

#[test]
fn timings_are_recorded_on_request() {
    let out = bin()
        .args(["--suite", "mtt", "--timings"])
        .output()
        .unwrap();
    let report = Report::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(report.checks.iter().all(|c| c.millis.is_some()));
}
