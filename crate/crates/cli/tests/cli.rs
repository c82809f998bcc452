use std::path::Path;
use std::process::{Command, Output};

fn rcmlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcmlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("RCMLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn payload_is_independent_of_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--set", "run.m=40", "--seed", "11", "--format", "both",
    ];
    let ra = rcmlab(&[&args[..], &["--workers", "1"]].concat(), a.path());
    let rb = rcmlab(&[&args[..], &["--workers", "4"]].concat(), b.path());
    assert_eq!(ra.status.code(), Some(0));
    assert_eq!(rb.status.code(), Some(0));
    assert_eq!(
        read(a.path(), "simulate.csv"),
        read(b.path(), "simulate.csv")
    );
    assert_eq!(
        read(a.path(), "simulate.json"),
        read(b.path(), "simulate.json")
    );
}

#[test]
fn workers_fall_back_to_environment() {
    let a = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rcmlab"))
        .args(["martingale-check", "--set", "run.m=5", "--out-dir"])
        .arg(a.path())
        .env("RCMLAB_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let meta: serde_json::Value =
        serde_json::from_str(&read(a.path(), "martingale-check.meta.json")).unwrap();
    assert_eq!(meta["workers"], 3);
}

#[test]
fn config_errors_exit_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\n[run]\nm = 10\nbogus = 1\n").unwrap();
    let out = rcmlab(&["moments", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");

    let out = rcmlab(&["simulate", "--set", "model.lambda=0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // component statistics need a bounded connection function
    let out = rcmlab(&["covariance-field", "--set", "run.m=10"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    // no sample of 200 gets this close to normal
    let out = rcmlab(
        &[
            "clt-test",
            "--set",
            "run.m=200",
            "--set",
            "run.n=2",
            "--set",
            "numerics.ks_threshold=1e-9",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "clt-test.json")).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn csv_layout_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcmlab(
        &[
            "moments", "--set", "run.n=2", "--seed", "9", "--format", "csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("moments.json").exists());
    let text = read(dir.path(), "moments.csv");
    assert!(!text.contains('\r'));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    assert_eq!(&headers[0], "seed");
    assert_eq!(&headers[1], "config_hash");
    assert_eq!(&headers[2], "bias_bound");
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[0], "9");
        assert_eq!(rec[1].len(), 64);
    }
}

#[test]
fn seed_does_not_change_config_hash_but_settings_do() {
    let dir = tempfile::tempdir().unwrap();
    let hash = |args: &[&str]| {
        let out = rcmlab(
            &[
                &["martingale-check", "--set", "run.m=3", "--format", "json"],
                args,
            ]
            .concat(),
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0));
        let v: serde_json::Value =
            serde_json::from_str(&read(dir.path(), "martingale-check.json")).unwrap();
        v["config_hash"].as_str().unwrap().to_string()
    };
    let a = hash(&["--seed", "1"]);
    let b = hash(&["--seed", "2"]);
    let c = hash(&["--set", "model.lambda=2"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn dump_writes_realization() {
    let dir = tempfile::tempdir().unwrap();
    let out = rcmlab(
        &["simulate", "--set", "run.m=2", "--dump-rep", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = read(dir.path(), "realization-1.txt");
    assert!(text.starts_with("# seed"));
}
