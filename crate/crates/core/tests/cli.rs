use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fairtrs");

fn run(args: &[&str], env: Option<(&str, &Path)>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("FAIRTRS_OUT_DIR");
    if let Some((k, v)) = env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
  "dataset": {"synthetic": {"m": 200, "test_m": 100, "seed": 3}},
  "radii": [0.1, 0.15],
  "solvers": ["TRS", "PGD", "RANDOM"],
  "train": {"epochs": 3, "seed": 9}
}"#;

#[test]
fn sweep_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["sweep", &cfg, "--out-dir", out.to_str().unwrap()], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = std::fs::read(a.join("fairness.csv")).unwrap();
    assert_eq!(fa, std::fs::read(b.join("fairness.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("accuracy.csv")).unwrap(),
        std::fs::read(b.join("accuracy.csv")).unwrap()
    );
    let text = String::from_utf8(fa).unwrap();
    // baseline + 3 solvers x 2 radii, each on two splits
    assert_eq!(text.lines().count(), 1 + 2 * (1 + 3 * 2));
    assert!(
        text.starts_with("solver,radius,split,ind,sep_y0,sep_y1,suf_yhat0,suf_yhat1,accuracy\n")
    );
    assert!(text.contains("\nNONE,0,train,"));

    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["complete"], true);
    assert_eq!(summary["config"]["train"]["learning_rate"], 0.01);
    assert_eq!(summary["config"]["dataset"]["synthetic"]["test_seed"], 4);
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let file_dir = dir.path().join("from_file");
    let cfg_text = SMALL.replacen(
        "\"radii\"",
        &format!(
            "\"output_dir\": {:?}, \"radii\"",
            file_dir.to_str().unwrap()
        ),
        1,
    );
    let cfg = write(dir.path(), "cfg.json", &cfg_text);
    let env_dir = dir.path().join("from_env");
    let flag_dir = dir.path().join("from_flag");

    assert!(run(&["sweep", &cfg], None).status.success());
    assert!(file_dir.join("fairness.csv").exists());

    assert!(run(&["sweep", &cfg], Some(("FAIRTRS_OUT_DIR", &env_dir)))
        .status
        .success());
    assert!(env_dir.join("fairness.csv").exists());

    let o = run(
        &["sweep", &cfg, "--out-dir", flag_dir.to_str().unwrap()],
        Some(("FAIRTRS_OUT_DIR", &env_dir)),
    );
    assert!(o.status.success());
    assert!(flag_dir.join("fairness.csv").exists());
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"solvers": ["TRS", "NEWTON"]}"#);
    let o = run(&["sweep", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("solvers[1]"), "{err}");

    let cfg = write(dir.path(), "bad2.json", r#"{"radii": [0.2, 0.1]}"#);
    assert_eq!(run(&["sweep", &cfg], None).status.code(), Some(1));
    assert_eq!(
        run(&["sweep", "/nonexistent.json"], None).status.code(),
        Some(1)
    );
}

#[test]
fn solver_failure_exits_2_after_flushing_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{
          "dataset": {"synthetic": {"m": 100, "test_m": 50}},
          "radii": [0.1],
          "solvers": ["TRS"],
          "train": {"epochs": 2, "trs": {"max_iter": 1}}
        }"#,
    );
    let o = run(&["sweep", &cfg, "--out-dir", out.to_str().unwrap()], None);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(out.join("fairness.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("NONE,0,")));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"complete\": false"));
}

#[test]
fn bench_writes_timing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let cfg = write(dir.path(), "cfg.json", SMALL);
    let o = run(
        &[
            "bench",
            &cfg,
            "--out-dir",
            out.to_str().unwrap(),
            "--epochs",
            "2",
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("timing.csv")).unwrap();
    assert!(csv.starts_with("solver,radius,mean_epoch_seconds,pgd_trs_ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 1 + 3 * 2);
    let pgd = csv.lines().find(|l| l.starts_with("PGD,0.1,")).unwrap();
    assert!(!pgd.ends_with(",NA"));
}

#[test]
fn audit_reports_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let preds = write(
        dir.path(),
        "preds.csv",
        "pred,label,sensitive\n1,1,0\n0,0,0\n1,0,1\n1,1,1\n",
    );
    let o = run(&["audit", &preds], None);
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(
        table.contains("Ind.  |        0.500 |        0.500"),
        "{table}"
    );
    assert!(table.contains("NA"));

    let o = run(&["audit", &preds, "--json"], None);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["independence"], 0.5);
    assert!(v["sufficiency_yhat0"].is_null());

    assert_eq!(
        run(&["audit", &preds, "--strict"], None).status.code(),
        Some(1)
    );
    let bad = write(dir.path(), "bad.csv", "pred,label,sensitive\n2,1,0\n");
    assert_eq!(run(&["audit", &bad], None).status.code(), Some(1));
    let o = run(&["audit", &preds, "--pred-col", "yhat"], None);
    assert!(String::from_utf8_lossy(&o.stderr).contains("yhat"));
}

#[test]
fn gen_synth_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(
        dir.path(),
        "p.json",
        r#"{"m": 25, "seed": 4, "shift": 0.05}"#,
    );
    let out = dir.path().join("d.csv");
    let o = run(&["gen-synth", &params, out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,y,s"));
    assert_eq!(text.lines().count(), 26);

    let bad = write(dir.path(), "bad.json", r#"{"shift": 0.5}"#);
    assert_eq!(
        run(&["gen-synth", &bad, out.to_str().unwrap()], None)
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_matches_frozen_golden() {
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().unwrap();
    let cfg = golden.join("sweep_200.json");
    let o = run(
        &[
            "sweep",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("fairness.csv")).unwrap(),
        std::fs::read_to_string(golden.join("fairness_200.csv")).unwrap()
    );
}
