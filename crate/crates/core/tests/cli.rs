//! End-to-end tests for the command-line interface.

use std::io::Write;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_sphere-cubics");

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).stdout(Stdio::piped()).stderr(Stdio::piped());
    if let Some(input) = stdin {
        cmd.stdin(Stdio::piped());
        let mut child = cmd.spawn().unwrap();
        child
            .stdin
            .take()
            .unwrap()
            .write_all(input.as_bytes())
            .unwrap();
        child.wait_with_output().unwrap()
    } else {
        cmd.stdin(Stdio::null());
        cmd.output().unwrap()
    }
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "invalid JSON output ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn random_then_minimize_is_deterministic() {
    let doc = run(&["random", "--seed", "3"], None);
    assert!(doc.status.success());
    let poly = String::from_utf8(doc.stdout).unwrap();
    let a = run(&["minimize", "--grid", "2000"], Some(&poly));
    let b = run(&["minimize", "--grid", "2000"], Some(&poly));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "repeated runs must be byte-identical");
    let v = stdout_json(&a);
    assert!(v["value"].is_number());
    assert!(v["certificate"].is_object());
}

#[test]
fn verify_cert_round_trip_and_tamper_detection() {
    let inline = r#"{"coeffs": {"200": 1.0, "020": 1.0, "002": 1.0, "300": 0.5}}"#;
    let out = run(&["certify", "--inline", inline], None);
    assert!(out.status.success());
    let mut report = stdout_json(&out);
    assert_eq!(report["verdict"], "inside");

    // the certify report is itself a valid verify-cert input
    let ok = run(&["verify-cert"], Some(&report.to_string()));
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let v = stdout_json(&ok);
    assert_eq!(v["pass"], true);

    // perturbing one certificate entry must be caught
    let entry = &mut report["certificate"]["B"]["re"][0][0];
    *entry = serde_json::json!(entry.as_f64().unwrap() + 1e-3);
    let bad = run(&["verify-cert"], Some(&report.to_string()));
    assert!(bad.status.success());
    let v = stdout_json(&bad);
    assert_eq!(v["pass"], false);
    assert!(!v["failures"].as_array().unwrap().is_empty());
}

#[test]
fn bad_coefficient_key_is_a_usage_error() {
    let out = run(
        &["certify", "--inline", r#"{"coeffs": {"100": 1.0}}"#],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("100"), "stderr: {msg}");
}

#[test]
fn malformed_json_is_a_usage_error() {
    let out = run(&["certify"], Some("not json"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn outside_verdict_still_exits_zero() {
    let inline = r#"{"coeffs": {"200": 1.0, "020": 1.0, "002": 1.0, "300": 1.5}}"#;
    let out = run(&["certify", "--inline", inline], None);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "outside");
    assert!(v["separating_point"].is_array());
    assert!(v["separating_value"].as_f64().unwrap() < 0.0);
}

#[test]
fn ball_reports_boundary_tolerance() {
    let inline = r#"{"coeffs": {"300": 1.0}}"#;
    let out = run(&["ball", "--inline", inline], None);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["verdict"], "boundary");
    assert_eq!(v["boundary_tolerance"], true);
}

#[test]
fn scale_matches_analytic_landmark() {
    let inline = r#"{"coeffs": {"300": 2.0}}"#;
    let out = run(&["scale", "--inline", inline], None);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!(v["agreement"].as_f64().unwrap() < 1e-5);
}

#[test]
fn text_format_renders_flat_lines() {
    let inline = r#"{"coeffs": {"200": 1.0, "020": 1.0, "002": 1.0, "300": 0.5}}"#;
    let out = run(&["certify", "--format", "text", "--inline", inline], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("verdict = ")), "{text}");
}

#[test]
fn batch_mode_emits_one_json_line_per_input() {
    let dir = std::env::temp_dir().join(format!("sphere-cubics-batch-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("batch.jsonl");
    std::fs::write(
        &path,
        "{\"coeffs\": {\"300\": 1.0}}\n{\"coeffs\": {\"300\": 2.0}}\n",
    )
    .unwrap();
    let out = run(&["ball", "--batch", path.to_str().unwrap()], None);
    assert!(out.status.success());
    let lines: Vec<_> = out
        .stdout
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .collect();
    assert_eq!(lines.len(), 2);
    let first: serde_json::Value = serde_json::from_slice(lines[0]).unwrap();
    let second: serde_json::Value = serde_json::from_slice(lines[1]).unwrap();
    assert_eq!(first["verdict"], "boundary");
    assert_eq!(second["verdict"], "outside");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
}
