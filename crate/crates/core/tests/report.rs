use padic_lab::report::{Check, Status};
use padic_lab::suite::{run_suite, Report, SuiteConfig, SuiteName};

fn config(suites: &[SuiteName]) -> SuiteConfig {
    let mut c = SuiteConfig::defaults(3);
    c.n_max = 1;
    c.suites = suites.to_vec();
    c.resolve()
}

#[test]
fn empty_suite_list_gives_an_empty_passing_report() {
    let r = run_suite(&config(&[])).unwrap();
    assert!(r.checks.is_empty());
    assert!(r.ok());
    assert_eq!(r.summary.total, 0);
}

#[test]
fn json_round_trip() {
    let r = run_suite(&config(&[SuiteName::Prop2, SuiteName::Mtt])).unwrap();
    let json = r.to_json();
    let back = Report::from_json(&json).unwrap();
    assert_eq!(back, r);
    assert_eq!(back.to_json(), json);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["config", "checks", "summary"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let check = &v["checks"][0];
    for key in ["name", "anchor", "status", "residual_valuation", "millis"] {
        assert!(check.get(key).is_some(), "{key}");
    }
    for key in [
        "p",
        "n_max",
        "precision",
        "truncation",
        "kappa_gamma",
        "q",
        "seed",
    ] {
        assert!(v["config"].get(key).is_some(), "{key}");
    }
}

#[test]
fn checks_are_sorted_and_counted() {
    let r = run_suite(&config(&[SuiteName::Prop2])).unwrap();
    let names: Vec<&str> = r.checks.iter().map(|c| c.name.as_str()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(r.summary.total, r.checks.len());
    assert_eq!(r.summary.passed, r.checks.len());
    assert!(r.check("prop2.congruence.n1").unwrap().passed());
}

#[test]
fn order_of_checks_does_not_matter() {
    let make = |rev: bool| {
        let mut checks = vec![
            Check::measured("b", "x", 30, 28, ""),
            Check::measured("a", "x", 29, 28, ""),
        ];
        if rev {
            checks.reverse();
        }
        Report::new(config(&[]), checks)
    };
    assert_eq!(make(false).to_json(), make(true).to_json());
}

#[test]
fn a_failure_makes_the_report_fail() {
    let r = Report::new(
        config(&[]),
        vec![
            Check::measured("ok", "x", 30, 28, ""),
            Check::measured("bad", "x", 3, 28, ""),
            Check::measured("neg", "x", 1, 2, "").expect_failure(),
        ],
    );
    assert!(!r.ok());
    assert_eq!(r.summary.failed, 1);
    assert_eq!(r.summary.expected_fail, 1);
    let only_expected = Report::new(
        config(&[]),
        vec![Check::measured("neg", "x", 1, 2, "").expect_failure()],
    );
    assert!(only_expected.ok());
    assert_eq!(only_expected.checks[0].status, Status::ExpectedFail);
}

#[test]
fn negative_control_is_named_and_never_silently_dropped() {
    let r = run_suite(&config(&[SuiteName::ColemanNegativeControl])).unwrap();
    assert_eq!(r.checks.len(), 1);
    assert_eq!(r.checks[0].status, Status::Skipped);
    assert!(r.checks[0].name.starts_with("coleman-negative-control."));
    assert!(!r.checks[0].detail.is_empty());
}

#[test]
fn invalid_configuration_is_refused_before_running() {
    let mut c = config(&[SuiteName::Honda]);
    c.p = 9;
    assert!(run_suite(&c).is_err());
}
