//! Runs the `gme` binary end to end on small inputs.

use std::path::Path;
use std::process::{Command, Output};

fn gme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gme")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gme(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    gme(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fingerprint(stdout: &str) -> String {
    stdout.lines().find_map(|l| l.strip_prefix("fingerprint ")).expect("fingerprint line").to_string()
}

#[test]
fn device_generation_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let c = dir.path().join("c.json");
    let fa = fingerprint(&ok(&["gen-devices", "--dims", "2,2,2", "--m", "2", "--seed", "5", "--out", p(&a)]));
    let fb = fingerprint(&ok(&["gen-devices", "--dims", "2,2,2", "--m", "2", "--seed", "5", "--out", p(&b)]));
    let fc = fingerprint(&ok(&["gen-devices", "--dims", "2,2,2", "--m", "2", "--seed", "6", "--out", p(&c)]));
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.json");
    assert_eq!(code(&["gen-devices", "--dims", "2,2", "--m", "0", "--out", p(&out)]), 2);
    assert_eq!(code(&["gen-devices", "--m", "2", "--out", p(&out)]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["bisep-search", "--alpha", "0.8", "--beta", "0.5"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn missing_device_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().join("ds.json");
    let status = code(&["gen-dataset", "--case", "3q", "--devices", p(&missing), "--scale", "0.01", "--out", p(&out)]);
    assert_ne!(status, 0);
    assert!(!out.exists());
}

#[test]
fn pipeline_is_reproducible_and_checks_fingerprints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let devices = d.join("dev.json");
    let other = d.join("other.json");
    ok(&["gen-devices", "--dims", "2,2,2", "--m", "2", "--seed", "1", "--out", p(&devices)]);
    ok(&["gen-devices", "--dims", "2,2,2", "--m", "2", "--seed", "2", "--out", p(&other)]);

    let data = d.join("train.json");
    let test = d.join("test.json");
    ok(&["gen-dataset", "--case", "3q", "--devices", p(&devices), "--scale", "0.01", "--seed", "3", "--out", p(&data)]);
    ok(&[
        "gen-dataset",
        "--case",
        "random-test",
        "--devices",
        p(&devices),
        "--scale",
        "0.1",
        "--seed",
        "4",
        "--out",
        p(&test),
    ]);
    // features from another device file cannot be mixed in
    let foreign = d.join("foreign.json");
    ok(&[
        "gen-dataset",
        "--case",
        "random-test",
        "--devices",
        p(&other),
        "--scale",
        "0.1",
        "--seed",
        "4",
        "--out",
        p(&foreign),
    ]);

    let model = d.join("model.json");
    ok(&["train", "--dataset", p(&data), "--seed", "7", "--max-epochs", "3", "--out", p(&model)]);
    let acc = ok(&["eval", "--model", p(&model), "--dataset", p(&test)]);
    assert!(acc.starts_with("accuracy "), "{acc}");
    assert_eq!(code(&["eval", "--model", p(&model), "--dataset", p(&foreign)]), 3);

    let scan1 = d.join("scan1");
    let scan2 = d.join("scan2");
    for out in [&scan1, &scan2] {
        ok(&[
            "scan",
            "--model",
            p(&model),
            "--devices",
            p(&devices),
            "--family",
            "ghz3",
            "--step",
            "0.05",
            "--out",
            p(out),
        ]);
    }
    for name in ["scan_ghz3.csv", "scan_ghz3.json"] {
        assert_eq!(std::fs::read(scan1.join(name)).unwrap(), std::fs::read(scan2.join(name)).unwrap(), "{name}");
    }
    let csv = std::fs::read_to_string(scan1.join("scan_ghz3.csv")).unwrap();
    assert!(csv.starts_with("parameter,prediction,ground_truth_known,ground_truth\n"));
    assert_eq!(csv.lines().count(), 22);
    assert_eq!(
        code(&[
            "scan",
            "--model",
            p(&model),
            "--devices",
            p(&other),
            "--family",
            "ghz3",
            "--step",
            "0.05",
            "--out",
            p(&d.join("scan3"))
        ]),
        3
    );

    // retraining with the same seed reproduces the model file
    let model2 = d.join("model2.json");
    ok(&["train", "--dataset", p(&data), "--seed", "7", "--max-epochs", "3", "--out", p(&model2)]);
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&model2).unwrap());

    // manifests verify, and detect an edited artifact
    let manifest = scan1.join("scan_ghz3.run.json");
    assert!(ok(&["verify-manifest", p(&manifest)]).contains(" ok: "));
    std::fs::write(scan1.join("scan_ghz3.csv"), "edited\n").unwrap();
    assert_ne!(code(&["verify-manifest", p(&manifest)]), 0);
}

#[test]
fn run_config_fills_absent_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("run.json");
    let from_config = d.join("a.json");
    let from_flag = d.join("b.json");
    let direct = d.join("c.json");
    std::fs::write(&config, format!(r#"{{"dims": [2, 2], "m": 3, "seed": 11, "out": "{}"}}"#, p(&from_config)))
        .unwrap();
    let fa = fingerprint(&ok(&["gen-devices", "--run-config", p(&config)]));
    assert!(from_config.exists());
    let fb = fingerprint(&ok(&["gen-devices", "--run-config", p(&config), "--seed", "12", "--out", p(&from_flag)]));
    let fc = fingerprint(&ok(&["gen-devices", "--dims", "2,2", "--m", "3", "--seed", "12", "--out", p(&direct)]));
    assert_ne!(fa, fb);
    assert_eq!(fb, fc);
    std::fs::write(&config, "[1, 2]").unwrap();
    assert_eq!(code(&["gen-devices", "--run-config", p(&config)]), 2);
}

#[test]
fn bisep_search_writes_a_verifiable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bisep");
    let stdout = ok(&["bisep-search", "--alpha", "0", "--beta", "0.05", "--restarts", "10", "--out", p(&out)]);
    assert!(stdout.starts_with("found"), "{stdout}");
    let cert: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("bisep_certificate.json")).unwrap()).unwrap();
    assert!(!cert["atoms"].as_array().unwrap().is_empty());
    assert!(cert["distance"].as_f64().unwrap() < 1e-6);
    assert!(ok(&["verify-manifest", p(&out.join("bisep.run.json"))]).contains(" ok: "));

    let out = dir.path().join("ghz");
    let stdout = ok(&[
        "bisep-search",
        "--alpha",
        "0",
        "--beta",
        "0.5",
        "--restarts",
        "2",
        "--iterations",
        "300",
        "--out",
        p(&out),
    ]);
    assert!(stdout.starts_with("not found"), "{stdout}");
    assert!(!out.join("bisep_certificate.json").exists());
}
