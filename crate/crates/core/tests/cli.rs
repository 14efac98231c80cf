use std::process::{Command, Output};

fn qexch(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qexch"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("QEXCH_THREADS", t),
        None => cmd.env_remove("QEXCH_THREADS"),
    };
    cmd.output().expect("binary runs")
}

#[test]
fn qfock_suite_passes() {
    let out = qexch(&["--suite", "qfock", "--q", "0.5", "--sites", "2", "--degree", "3"], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["suite"], "qfock");
    assert_eq!(v[0]["passed"], true);
    assert!(v[0]["data"][0]["commutation_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn bad_q_is_usage_error() {
    let out = qexch(&["--suite", "qfock", "--q", "1.5"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q must lie in (-1,1)"));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(qexch(&["--bogus"], None).status.code(), Some(2));
    assert_eq!(qexch(&["--suite", "nope"], None).status.code(), Some(2));
    assert_eq!(qexch(&["--perm-max", "11"], None).status.code(), Some(2));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("report.json");
    let out = qexch(&["--suite", "boolean", "--out", target.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = |p: &std::path::Path| {
        vec![
            "--suite".to_string(),
            "all".into(),
            "--seed".into(),
            "11".into(),
            "--perm-max".into(),
            "6".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    let aa: Vec<String> = args(&a);
    let bb: Vec<String> = args(&b);
    let ra = qexch(&aa.iter().map(String::as_str).collect::<Vec<_>>(), None);
    let rb = qexch(&bb.iter().map(String::as_str).collect::<Vec<_>>(), Some("1"));
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    assert_eq!(rb.status.code(), Some(0));
    let ja = std::fs::read(&a).unwrap();
    assert_eq!(ja, std::fs::read(&b).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    let suites: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["suite"].as_str().unwrap()).collect();
    assert_eq!(suites, ["freeprod", "qfock", "car", "boolean", "haagerup"]);
}

#[test]
fn report_schemas() {
    let out = qexch(&["--suite", "car", "--modes", "3"], None);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = &v[0]["data"];
    for key in ["n", "car_residual", "parity_residual", "evenness_tests", "definetti_mixture_gap"] {
        assert!(d.get(key).is_some(), "missing {key}");
    }
    let out = qexch(&["--suite", "boolean", "--sites", "4"], None);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = &v[0]["data"];
    assert_eq!(d["span_rank"], 25);
    for case in d["obstruction_cases"].as_array().unwrap() {
        assert!(case["gap"].as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn haagerup_csv_and_text() {
    let out = qexch(&["--suite", "haagerup", "--lambda", "1,inf", "--perm-max", "5", "--format", "csv"], None);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("n,mean_re,mean_im,target_re,target_im,gap,bound"));
    assert_eq!(lines.count(), 8);

    let out = qexch(&["--suite", "haagerup", "--format", "text"], None);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "haagerup: PASS\n");
}

#[test]
fn failing_check_exits_one() {
    // a tolerance below the rounding floor makes the residual checks fail
    let out = qexch(&["--suite", "qfock", "--q", "0.9", "--sites", "3", "--degree", "4", "--tol", "1e-30"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failing checks"));
}
