use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcaanon"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// 10×3 fixture: two strongly related columns and one independent one.
fn fixture(dir: &Path) {
    let mut csv = String::from("age,income,score\n");
    for i in 0..10 {
        let x = i as f64;
        let noise = [0.3, -0.1, 0.2, -0.4, 0.1, 0.0, -0.2, 0.4, -0.3, 0.2][i];
        let z = [1.0, -2.0, 0.5, 3.0, -1.5, 2.5, -0.5, 0.0, 1.5, -3.0][i];
        csv.push_str(&format!("{},{},{}\n", 20.0 + x, 1000.0 + 150.0 * x + 40.0 * noise, z));
    }
    write(dir, "a.csv", &csv);
    write(
        dir,
        "loose.json",
        r#"{"correlation": {"enabled": true, "threshold": 0.0}}"#,
    );
    write(
        dir,
        "impossible.json",
        r#"{"correlation": {"enabled": true, "threshold": 1.0}}"#,
    );
}

fn exit(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

#[test]
fn anonymize_changes_data_and_records_history() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    let o = run(
        tmp.path(),
        &["anonymize", "--input", "a.csv", "--output", "b.csv", "--policy", "loose.json"],
    );
    assert_eq!(exit(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_ne!(
        fs::read(tmp.path().join("a.csv")).unwrap(),
        fs::read(tmp.path().join("b.csv")).unwrap()
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("b.report.json")).unwrap()).unwrap();
    let history = report["history"].as_array().unwrap();
    assert!(!history.is_empty());
    for (i, h) in history.iter().enumerate() {
        assert_eq!(h["k"], i + 1);
    }
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(summary["components_removed"].as_u64().unwrap() >= 1);
}

#[test]
fn impossible_policy_returns_input_unchanged() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    let o = run(
        tmp.path(),
        &["anonymize", "--input", "a.csv", "--output", "b.csv", "--policy", "impossible.json"],
    );
    assert_eq!(exit(&o), 0);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["components_removed"], 0);
    assert_eq!(
        fs::read(tmp.path().join("a.csv")).unwrap(),
        fs::read(tmp.path().join("b.csv")).unwrap()
    );
}

#[test]
fn history_entries_match_standalone_metrics() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    write(
        tmp.path(),
        "all.json",
        r#"{"norm_sum": {"enabled": true, "threshold": 1e9},
            "norm_frobenius": {"enabled": true, "threshold": 1e9},
            "correlation": {"enabled": true, "threshold": -1.0}}"#,
    );
    let o = run(
        tmp.path(),
        &[
            "anonymize", "--input", "a.csv", "--output", "b.csv", "--policy", "all.json",
            "--max-k", "1",
        ],
    );
    assert_eq!(exit(&o), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("b.report.json")).unwrap()).unwrap();
    assert_eq!(report["stopped_reason"], "max_k_reached");
    let from_loop = &report["history"][0]["report"]["metrics"];

    let o = run(
        tmp.path(),
        &["metrics", "--input", "a.csv", "--anonymized", "b.csv", "--policy", "all.json"],
    );
    assert_eq!(exit(&o), 0);
    let standalone: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for m in ["norm_sum", "norm_frobenius", "correlation"] {
        let x = from_loop[m]["value"].as_f64().unwrap();
        let y = standalone["metrics"][m]["value"].as_f64().unwrap();
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{m}: {x} vs {y}");
    }
}

#[test]
fn metrics_identity_and_disabled_absent() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    let o = run(tmp.path(), &["metrics", "--input", "a.csv", "--anonymized", "a.csv"]);
    assert_eq!(exit(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["metrics"]["norm_sum"]["value"], 0.0);
    assert!((r["metrics"]["correlation"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(r["metrics"]["kl"]["value"].as_f64().unwrap().abs() < 1e-9);

    let o = run(
        tmp.path(),
        &["metrics", "--input", "a.csv", "--anonymized", "a.csv", "--policy", "loose.json"],
    );
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let keys: Vec<_> = r["metrics"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["correlation"]);
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    write(tmp.path(), "narrow.csv", "a,b\n1,2\n3,5\n");
    let o = run(tmp.path(), &["metrics", "--input", "a.csv", "--anonymized", "narrow.csv"]);
    assert_eq!(exit(&o), 3);
    assert_eq!(stderr_json(&o)["error"]["kind"], "data");

    write(tmp.path(), "bad.json", r#"{"entropy": {"enabled": true, "threshold": 1}}"#);
    let o = run(
        tmp.path(),
        &["anonymize", "--input", "a.csv", "--output", "b.csv", "--policy", "bad.json"],
    );
    assert_eq!(exit(&o), 2);
    assert_eq!(stderr_json(&o)["error"]["exit_code"], 2);

    write(tmp.path(), "flat.csv", "a,b\n1,2\n1,5\n1,7\n");
    let o = run(
        tmp.path(),
        &["anonymize", "--input", "flat.csv", "--output", "b.csv", "--policy", "loose.json"],
    );
    assert_eq!(exit(&o), 3);

    let o = run(tmp.path(), &["anonymize", "--input", "a.csv"]);
    assert_eq!(exit(&o), 2);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    fixture(tmp.path());
    let mut outputs = Vec::new();
    for name in ["r1", "r2"] {
        let o = run(
            tmp.path(),
            &[
                "anonymize", "--input", "a.csv", "--output", &format!("{name}.csv"),
                "--policy", "loose.json", "--seed", "42",
                "--emit", "report-json,history-csv,image-pgm",
            ],
        );
        assert_eq!(exit(&o), 0);
        outputs.push(
            ["csv", "report.json", "history.csv", "pgm"]
                .map(|ext| fs::read(tmp.path().join(format!("{name}.{ext}"))).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn test_image(dir: &Path) {
    let (h, w) = (48usize, 40usize);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for i in 0..h {
        for j in 0..w {
            let v = 128.0
                + 60.0 * ((i as f64) / 5.0).sin() * ((j as f64) / 7.0).cos()
                + 30.0 * ((i * j) as f64 / 50.0).sin()
                + ((i * 31 + j * 17) % 13) as f64;
            bytes.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    fs::write(dir.join("img.pgm"), bytes).unwrap();
}

#[test]
fn image_study_writes_stimuli_and_zero_k_is_lossless() {
    let tmp = TempDir::new().unwrap();
    test_image(tmp.path());
    let o = run(
        tmp.path(),
        &["image-study", "--input", "img.pgm", "--output", "out", "--ks", "0,1,3", "--seed", "9"],
    );
    assert_eq!(exit(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let study: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("out/study.json")).unwrap()).unwrap();
    let r0 = &study["results"][0];
    assert_eq!(r0["k"], 0);
    assert_eq!(r0["psnr"], "inf");
    assert_eq!(r0["ssim"], 1.0);
    assert_eq!(study["eigen_decay"].as_array().unwrap().len(), 5);
    assert!(study["sigmoid_fit"].is_object());
    for f in ["reference.pgm", "k0.pgm", "k1.pgm", "k3.pgm", "manifest.json"] {
        assert!(tmp.path().join("out").join(f).exists(), "{f}");
    }
    assert_eq!(fs::read(tmp.path().join("out/study.json")).unwrap(), o.stdout);
}

#[test]
fn image_study_rejects_k_beyond_width() {
    let tmp = TempDir::new().unwrap();
    test_image(tmp.path());
    let o = run(
        tmp.path(),
        &["image-study", "--input", "img.pgm", "--output", "out", "--ks", "40"],
    );
    assert_eq!(exit(&o), 2);
}

#[test]
fn fit_eigen_reads_order_eigenvalue_csv() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "e.csv",
        "order,eigenvalue\n1,333320\n2,197204\n3,124780\n4,80285\n5,67232\n",
    );
    let o = run(tmp.path(), &["fit-eigen", "--input", "e.csv"]);
    assert_eq!(exit(&o), 0);
    let fit: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((fit["b"].as_f64().unwrap() - 2.2111).abs() < 0.05);
    let mut keys: Vec<_> = fit.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["a", "b", "c", "d", "r_squared"]);
}
