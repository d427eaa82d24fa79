use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semitoric"))
        .args(args)
        .env("SEMITORIC_OUT", dir)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_doc(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).expect("stderr is one JSON document")
}

#[test]
fn spin_spectrum_has_2j_plus_1_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["spectrum", "--model", "spin_toric", "--j", "10"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("hbar,lambda1,lambda2,block"));
    assert_eq!(lines.count(), 21);
    let saved = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(saved, text);
    assert!(dir.path().join("spectrum.svg").exists());
}

#[test]
fn classify_jaynes_cummings() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json_stdout(&run(
        dir.path(),
        &["classify", "--model", "jaynes_cummings"],
    ));
    let ff = doc["result"]["focus_focus"].as_array().unwrap();
    assert_eq!(ff.len(), 1);
    let coords: Vec<f64> = ff[0]["point"]["coords"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let target = [0.0, 0.0, 1.0, 0.0, 0.0];
    assert!(
        coords.iter().zip(target).all(|(a, b)| (a - b).abs() < 1e-8),
        "{coords:?}"
    );
    assert_eq!(doc["result"]["others_elliptic_type"], Value::Bool(true));
    assert_eq!(doc["config"]["model"], "jaynes_cummings");
    assert_eq!(doc["command"], "classify");
}

#[test]
fn taylor_jaynes_cummings() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json_stdout(&run(dir.path(), &["taylor", "--model", "jaynes_cummings"]));
    let a10 = doc["result"]["a10"].as_f64().unwrap();
    let a01 = doc["result"]["a01"].as_f64().unwrap();
    assert!((a10 - std::f64::consts::FRAC_PI_2).abs() < 1e-2, "{a10}");
    assert!((a01 - 5.0 * 2f64.ln()).abs() < 1e-2, "{a01}");
    assert!(dir.path().join("taylor.json").exists());
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--model", "coupled_angular_momenta", "--j", "4"][..],
        &[
            "classify",
            "--model",
            "jaynes_cummings",
            "--seeds",
            "16",
            "--seed",
            "3",
        ][..],
    ] {
        let x = run(a.path(), args);
        let y = run(b.path(), args);
        assert!(x.status.success());
        assert_eq!(x.stdout, y.stdout);
    }
    let x = std::fs::read(a.path().join("classify.json")).unwrap();
    let y = std::fs::read(b.path().join("classify.json")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn config_file_and_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("elsewhere");
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": "cpn_rotation", "params": {"n": 2, "lambda": 1}, "resolution": 24}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "polygon",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            other.to_str().unwrap(),
        ],
    );
    let doc = json_stdout(&out);
    assert_eq!(doc["config"]["resolution"], 24);
    assert_eq!(doc["result"]["delzant"]["pass"], Value::Bool(true));
    assert_eq!(
        doc["result"]["polygon"]["vertices"]
            .as_array()
            .unwrap()
            .len(),
        3
    );
    assert!(other.join("polygon.json").exists());
    assert!(other.join("polygon.svg").exists());
    assert!(!dir.path().join("polygon.json").exists());
}

#[test]
fn floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "periods",
            "--model",
            "jaynes_cummings",
            "--value",
            "0.5,-0.2",
        ],
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let line = text.lines().find(|l| l.contains("\"tau1\"")).unwrap();
    let num = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = num.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{num}");
    json_stdout(&out);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["classify", "--model", "no_such_model"][..],
        &["periods", "--model", "jaynes_cummings"][..],
        &["spectrum", "--model", "spherical_pendulum"][..],
        &["spectrum", "--model", "spin_toric", "--j", "0.3"][..],
        &["frobnicate"][..],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = error_doc(&out);
        assert_eq!(err["kind"], "validation", "{args:?}");
        assert!(err["error"].is_string());
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"model": "jaynes_cummings", "frobs": 3}"#).unwrap();
    let out = run(dir.path(), &["taylor", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_doc(&out)["error"], "Config");
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["periods", "--model", "jaynes_cummings", "--value", "1,0"],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = error_doc(&out);
    assert_eq!(err["error"], "SingularValue");
    assert_eq!(err["kind"], "numeric");
    assert_eq!(err["command"], "periods");
}

#[test]
fn systems_lists_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json_stdout(&run(dir.path(), &["systems"]));
    let ids: Vec<&str> = doc["result"]["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["id"].as_str().unwrap())
        .collect();
    for id in [
        "jaynes_cummings",
        "coupled_angular_momenta",
        "s2_height",
        "cpn_rotation",
        "spherical_pendulum",
    ] {
        assert!(ids.contains(&id), "{id}");
    }
}

#[test]
fn sweep_brackets_the_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json_stdout(&run(dir.path(), &["sweep"]));
    let tr = doc["result"]["sweep"]["transitions"].as_array().unwrap();
    assert_eq!(tr.len(), 2);
    assert!(tr[0][1].as_f64().unwrap() < 0.5 && tr[1][0].as_f64().unwrap() > 0.5);
    assert_eq!(tr[0][3], "focus-focus");
}

#[test]
fn recover_finds_the_jaynes_cummings_value() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json_stdout(&run(dir.path(), &["recover", "--model", "jaynes_cummings"]));
    let found = doc["result"]["marked_values"].as_array().unwrap();
    assert_eq!(found.len(), 1);
    let (x, y) = (found[0][0].as_f64().unwrap(), found[0][1].as_f64().unwrap());
    assert!((x - 1.0).hypot(y) < 0.05, "{x} {y}");
    assert!(dir.path().join("recover.svg").exists());
}

#[test]
fn selftest_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["selftest", "--criterion", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("PASS criterion 4:"), "{text}");
    let out = run(dir.path(), &["selftest", "--criterion", "12"]);
    assert_eq!(out.status.code(), Some(2));
}
