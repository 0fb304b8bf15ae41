use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_edgebench");

fn edgebench(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("EDGEBENCH_OUT")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn bundle(name: &str, dir: &Path) {
    let o = edgebench(&["fixtures", name, "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn corpus(name: &str) -> String {
    format!("{}/../core/corpus/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn unknown_fixture_lists_names() {
    let o = edgebench(&["fixtures", "table9", "--out", "unused"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("inf6-bookinfo") && err.contains("fig4a"));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(code(&edgebench(&["run"])), 1);
    assert_eq!(code(&edgebench(&["frobnicate"])), 1);
    assert_eq!(code(&edgebench(&["--help"])), 0);
}

#[test]
fn validate_cam_exit_codes() {
    assert_eq!(
        code(&edgebench(&["validate-cam", &corpus("bookinfo.yaml")])),
        0
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.yaml");
    fs::write(
        &bad,
        fs::read_to_string(corpus("acm-sample.yaml"))
            .unwrap()
            .replace("to: backend", "to: front-end"),
    )
    .unwrap();
    assert_eq!(code(&edgebench(&["validate-cam", s(&bad)])), 3);
    fs::write(&bad, "appName: [unclosed\n").unwrap();
    assert_eq!(code(&edgebench(&["validate-cam", s(&bad)])), 3);
    assert_eq!(
        code(&edgebench(&[
            "validate-cam",
            s(&dir.path().join("missing.yaml"))
        ])),
        1
    );
}

#[test]
fn unknown_cam_keys_are_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("extra.yaml");
    fs::write(
        &p,
        format!(
            "{}colour: blue\n",
            fs::read_to_string(corpus("pause.yaml")).unwrap()
        ),
    )
    .unwrap();
    let o = edgebench(&["validate-cam", s(&p)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn mip_zero_baseline_row_reports_error_and_keeps_others() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.csv");
    let b = dir.path().join("b.csv");
    let header = "phase,action_id,description,mode\n";
    fs::write(
        &t,
        format!(
            "{header}k8s-installation,a1,run script,manual\nservice-deployment,s1,deploy,manual\n"
        ),
    )
    .unwrap();
    fs::write(
        &b,
        format!("{header}k8s-installation,a1,install,manual\nk8s-installation,a2,join,manual\nservice-deployment,s1,deploy,automated\n"),
    )
    .unwrap();
    let o = edgebench(&["mip", "--treatment", s(&t), "--baseline", s(&b)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("k8s-installation,1,2,50.00"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("service-deployment"));
}

#[test]
fn spec_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.yaml");
    fs::write(&spec, "id: x\nrepetitions: zero\n").unwrap();
    let o = edgebench(&[
        "run",
        "--spec",
        s(&spec),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("repetitions"));
}

#[test]
fn run_writes_tables_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    bundle("inf6-bookinfo", dir.path());
    let spec = dir.path().join("spec.yaml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        code(&edgebench(&["run", "--spec", s(&spec), "--out", s(&a)])),
        0
    );
    assert_eq!(
        code(&edgebench(&["run", "--spec", s(&spec), "--out", s(&b)])),
        0
    );
    for f in [
        "lifecycle.csv",
        "report.json",
        "fig7_readiness.csv",
        "raw/campaign.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let lifecycle = fs::read_to_string(a.join("lifecycle.csv")).unwrap();
    assert!(lifecycle
        .starts_with("scale,metric,arm,label,n,min_s,max_s,avg_s,p95_s,stdev_s,overhead_pct\n"));
    assert!(lifecycle.contains("service_startup"));
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    bundle("inf6-bookinfo", dir.path());
    let spec = dir.path().join("spec.yaml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    edgebench(&["run", "--spec", s(&spec), "--out", s(&a), "--format", "csv"]);
    edgebench(&[
        "run",
        "--spec",
        s(&spec),
        "--out",
        s(&b),
        "--format",
        "csv",
        "--seed",
        "7",
    ]);
    assert!(!a.join("report.json").exists());
    assert_ne!(
        fs::read(a.join("lifecycle.csv")).unwrap(),
        fs::read(b.join("lifecycle.csv")).unwrap()
    );
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["fixtures", "table4"])
        .env("EDGEBENCH_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("spec.yaml").exists());
}

#[test]
fn report_subcommand_rechecks_saved_reports() {
    let dir = tempfile::tempdir().unwrap();
    bundle("fig4b", dir.path());
    let out = dir.path().join("out");
    edgebench(&[
        "run",
        "--spec",
        s(&dir.path().join("spec.yaml")),
        "--out",
        s(&out),
    ]);
    let json = out.join("report.json");
    let again = dir.path().join("again");
    assert_eq!(
        code(&edgebench(&[
            "report",
            "--in",
            s(&json),
            "--out",
            s(&again)
        ])),
        0
    );
    assert_eq!(
        fs::read(out.join("phases.csv")).unwrap(),
        fs::read(again.join("phases.csv")).unwrap()
    );

    let text = fs::read_to_string(&json).unwrap();
    let tampered = text.replacen("\"share_pct\": 18.6", "\"share_pct\": 19.6", 1);
    assert_ne!(text, tampered);
    fs::write(&json, tampered).unwrap();
    assert_eq!(
        code(&edgebench(&[
            "report",
            "--in",
            s(&json),
            "--out",
            s(&again)
        ])),
        2
    );
}

#[test]
fn capacity_failures_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    bundle("inf2-150pods", dir.path());
    let spec = dir.path().join("spec.yaml");
    let text = fs::read_to_string(&spec)
        .unwrap()
        .replace("cpuCores: 12", "cpuCores: 5");
    fs::write(&spec, text).unwrap();
    let out = dir.path().join("out");
    let o = edgebench(&[
        "run",
        "--spec",
        s(&spec),
        "--out",
        s(&out),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let failures = fs::read_to_string(out.join("failures.csv")).unwrap();
    assert_eq!(
        failures.lines().filter(|l| l.starts_with("150,")).count(),
        10
    );
}
