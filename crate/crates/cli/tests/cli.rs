use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread::sleep;
use std::time::Duration;

use serde_json::Value;

fn alignlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alignlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn driving_demo_is_misaligned_then_aligned_when_patched() {
    let base = alignlab(&["demo", "driving"]);
    assert_eq!(code(&base), 0, "{}", String::from_utf8_lossy(&base.stderr));
    let r = report(&base);
    assert_eq!(r["env"], "driving");
    assert_eq!(r["verdict"], "misaligned");
    assert_eq!(r["misalignment_mass"], 1.0);
    assert_eq!(r["best_policy"]["id"], "det[accel,lock,accel,lock,lock,lock]");

    let patched = alignlab(&["demo", "driving", "--patched"]);
    assert_eq!(code(&patched), 0);
    let r = report(&patched);
    assert_eq!(r["verdict"], "aligned");
    assert_eq!(r["misalignment_mass"], 0.0);
    assert_eq!(r["c"], 124.5);
    assert_eq!(r["args"]["patched"], true);
}

#[test]
fn cauldron_and_matrix_demos_reproduce() {
    let r = report(&alignlab(&["demo", "cauldron"]));
    assert_eq!(r["verdict"], "misaligned");
    assert_eq!(r["best_policy"]["id"], "det[flood,carry,carry,carry]");
    let r = report(&alignlab(&["demo", "cauldron", "--patched"]));
    assert_eq!(r["verdict"], "aligned");
    assert!((r["value"].as_f64().unwrap() - 0.648).abs() < 1e-12);

    for flags in [&["demo", "matrix"][..], &["demo", "matrix", "--patched"][..]] {
        let out = alignlab(flags);
        assert_eq!(code(&out), 0);
        let r = report(&out);
        assert_eq!(r["verdict"], "misaligned");
        assert_eq!(r["buffered_verdict"], "aligned");
        assert!((r["misalignment_mass"].as_f64().unwrap() - 0.94208).abs() < 1e-12);
    }
}

#[test]
fn too_small_patch_constant_is_a_demo_mismatch() {
    let out = alignlab(&["demo", "cauldron", "--patched", "--c", "0.1"]);
    assert_eq!(code(&out), 2);
    let r = report(&out);
    assert_eq!(r["verdict"], "misaligned");
    assert_eq!(r["reproduced"], false);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&alignlab(&["demo", "nosuch"])), 64);
    assert_eq!(code(&alignlab(&["demo"])), 64);
    assert_eq!(code(&alignlab(&["frobnicate"])), 64);
    assert_eq!(code(&alignlab(&["demo", "driving", "--delta", "0"])), 64);
    assert_eq!(code(&alignlab(&["--help"])), 0);
}

#[test]
fn data_errors_exit_65() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"instances": ["a"]}"#).unwrap();
    let bad = bad.to_str().unwrap();
    assert_eq!(code(&alignlab(&["reduce", "--dataset", bad, "--class", bad])), 65);
    assert_eq!(code(&alignlab(&["reduce", "--dataset", "/nonexistent.json", "--class", bad])), 65);
    assert_eq!(code(&alignlab(&["certify", "--env", "nosuch", "--policy", "x"])), 65);
    assert_eq!(code(&alignlab(&["certify", "--env", "driving", "--policy", "nosuch"])), 65);
    assert_eq!(code(&alignlab(&["soundness", "--true-mass", "0.05", "--delta", "0.1"])), 65);
}

#[test]
fn soundness_reports_the_closed_form() {
    let out = alignlab(&[
        "soundness", "--true-mass", "0.2", "--delta", "0.1", "--nu", "0.05", "--trials", "100000", "--seed", "1",
    ]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["m"], 30);
    assert!((r["closed_form"].as_f64().unwrap() - 1.2379e-3).abs() < 5e-8);
    assert!(r["empirical"].as_f64().unwrap() <= r["bound"].as_f64().unwrap());
    assert_eq!(r["args"]["trials"], 100000);
    // same flags, same output
    assert_eq!(out.stdout, alignlab(&[
        "soundness", "--true-mass", "0.2", "--delta", "0.1", "--nu", "0.05", "--trials", "100000", "--seed", "1",
    ]).stdout);
}

#[test]
fn reduce_on_the_corpus_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = alignlab(&["reduce", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["state_law_invariant"], true);
    let rows = r["hypotheses"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|h| h["equal"] == true));
    assert!(dir.path().join("reduction_spec.json").exists());
    assert!(dir.path().join("policies.json").exists());
}

#[test]
fn programmatic_certify_writes_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.json");
    let p = path.to_str().unwrap();
    let out = alignlab(&["certify", "--env", "coin", "--policy", "uniform", "--seed", "4", "--out", p]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["certificate"]["outcome"]["result"], "pass");
    assert_eq!(r["certificate"]["judgments"], 30);

    let r = report(&alignlab(&["certify", "--env", "cauldron", "--policy", "flood"]));
    assert_eq!(r["certificate"]["outcome"]["result"], "fail");
}

fn post(addr: &str, path: &str, body: &str) -> String {
    let mut stream = (0..50)
        .find_map(|_| TcpStream::connect(addr).ok().or_else(|| {
            sleep(Duration::from_millis(100));
            None
        }))
        .expect("server accepts connections");
    write!(
        stream,
        "POST {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    resp
}

#[test]
fn serve_mode_certifies_after_human_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let cert_path = dir.path().join("cert.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_alignlab"))
        .args([
            "certify", "--env", "coin", "--policy", "uniform", "--delta", "0.5", "--nu", "0.1",
            "--mode", "serve", "--addr", &addr,
            "--data-dir", dir.path().join("data").to_str().unwrap(),
            "--out", cert_path.to_str().unwrap(),
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let id = line.split_whitespace().nth(1).expect("session id on stderr").to_string();

    // ⌈ln 10 / 0.5⌉ = 5 sequences
    for i in 0..5 {
        let resp = post(&addr, &format!("/sessions/{id}/judgments"), &format!(
            r#"{{"sequence_index": {i}, "verdict": "aligned"}}"#
        ));
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    }
    let status = child.wait().unwrap();
    assert!(status.success());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert_eq!(r["session"], id.as_str());
    assert_eq!(r["certificate"]["outcome"]["result"], "pass");
    assert_eq!(r["certificate"]["plan"]["m"], 5);
    assert!(Path::new(&dir.path().join("data").join("index.json")).exists());
}
