//! The `reasonpath` binary run end to end on the bundled fixture.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures/synthetic")
        .join(name)
}

fn reasonpath(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reasonpath"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("REASONPATH_LOG", "error")
        .output()
        .unwrap()
}

fn run_ok(args: &[&str], out: &Path) {
    let o = reasonpath(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn config_arg() -> String {
    fixture("config.toml").to_string_lossy().into_owned()
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn schema() -> jsonschema::JSONSchema {
    let text = read(&Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json"));
    let schema: Value = serde_json::from_slice(&text).unwrap();
    jsonschema::JSONSchema::compile(&schema).unwrap()
}

#[test]
fn full_run_validates_and_reruns_identically() {
    let cfg = config_arg();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_ok(&["all", "--config", &cfg], a.path());
    run_ok(&["all", "--config", &cfg], b.path());
    for name in [
        "report.json",
        "report.csv",
        "manifest.json",
        "trajectories.json",
        "graph_metrics.json",
        "rank_plots.csv",
        "smape.csv",
        "graphlets.csv",
        "passk.csv",
        "graphs/p02__squeezed.edges.csv",
    ] {
        assert_eq!(read(&a.path().join(name)), read(&b.path().join(name)), "{name}");
    }

    let report: Value = serde_json::from_slice(&read(&a.path().join("report.json"))).unwrap();
    let compiled = schema();
    if let Err(errors) = compiled.validate(&report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:#?}");
    }
    assert_eq!(report["pairs"].as_array().unwrap().len(), 6);

    let manifest: Value = serde_json::from_slice(&read(&a.path().join("manifest.json"))).unwrap();
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn stages_compose_into_the_same_report() {
    let cfg = config_arg();
    let (whole, parts) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_ok(&["all", "--config", &cfg], whole.path());
    run_ok(&["trajectories", "--config", &cfg], parts.path());
    run_ok(&["metrics", "--config", &cfg], parts.path());
    run_ok(&["report", "--config", &cfg], parts.path());
    for name in ["report.json", "report.csv", "manifest.json"] {
        assert_eq!(read(&whole.path().join(name)), read(&parts.path().join(name)), "{name}");
    }
}

#[test]
fn single_stages_write_their_outputs() {
    let cfg = config_arg();
    let out = tempfile::tempdir().unwrap();
    for (stage, file) in [
        ("ingest", "corpus.jsonl"),
        ("segment", "chunks.jsonl"),
        ("embed", "embeddings.jsonl"),
        ("graph", "graphs/p01__expanded.nodes.csv"),
        ("graphlets", "graphlets.csv"),
        ("passk", "passk.csv"),
    ] {
        run_ok(&[stage, "--config", &cfg], out.path());
        assert!(out.path().join(file).exists(), "{stage} did not write {file}");
    }
    let chunks = read(&out.path().join("chunks.jsonl"));
    let embeddings = read(&out.path().join("embeddings.jsonl"));
    let lines = |b: &[u8]| b.iter().filter(|&&c| c == b'\n').count();
    assert_eq!(lines(&chunks), lines(&embeddings));
}

#[test]
fn flags_override_the_config_file() {
    let cfg = config_arg();
    let out = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "trajectories",
            "--config",
            &cfg,
            "--metric",
            "bleu",
            "--threshold",
            "0",
            "--ks",
            "1,3",
        ],
        out.path(),
    );
    let t: Value = serde_json::from_slice(&read(&out.path().join("trajectories.json"))).unwrap();
    assert_eq!(t["metric"], "bleu");
    for c in t["counts"].as_array().unwrap() {
        assert_eq!(c["n_correct_clusters"], c["m_plus"]);
    }
    let ks: Vec<&String> = t["pass_at_k"]["squeezed"].as_object().unwrap().keys().collect();
    assert_eq!(ks, ["1", "3"]);
}

#[test]
fn oversized_k_values_are_dropped() {
    let out = tempfile::tempdir().unwrap();
    run_ok(&["passk", "--config", &config_arg(), "--ks", "1,16,17,64"], out.path());
    let csv = String::from_utf8(read(&out.path().join("passk.csv"))).unwrap();
    assert!(csv.contains("squeezed,16,") && !csv.contains(",17,") && !csv.contains(",64,"));
}

#[test]
fn configuration_errors_exit_2() {
    let out = tempfile::tempdir().unwrap();
    let bad = out.path().join("bad.toml");
    std::fs::write(&bad, "threshold = 3.0\n").unwrap();
    for args in [
        vec!["all", "--config", bad.to_str().unwrap()],
        vec!["trajectories"],
        vec!["trajectories", "--config", "/nonexistent/config.toml"],
        vec!["trajectories", "--metric", "rouge"],
    ] {
        let o = reasonpath(&args, out.path());
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn unlabeled_corpus_is_a_data_error_from_ingest() {
    let out = tempfile::tempdir().unwrap();
    let o = reasonpath(
        &["trajectories", "--corpus", fixture("corpus.jsonl").to_str().unwrap()],
        out.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ingest") && err.contains("gold answer"), "{err}");
}

#[test]
fn missing_embeddings_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let full = String::from_utf8(read(&fixture("embeddings.jsonl"))).unwrap();
    let kept: Vec<&str> = full
        .lines()
        .filter(|l| !l.contains(r#""sample_index":3,"position":2,"#))
        .collect();
    assert!(kept.len() < full.lines().count());
    std::fs::write(dir.path().join("embeddings.jsonl"), kept.join("\n")).unwrap();
    for f in ["corpus.jsonl", "problems.jsonl", "config.toml"] {
        std::fs::copy(fixture(f), dir.path().join(f)).unwrap();
    }
    let cfg = dir.path().join("config.toml");
    let o = reasonpath(&["graph", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("p01/expanded/3#2") && err.contains("p01/squeezed/3#2"),
        "{err}"
    );
}

/// Minimal `/health` + `/embed` service; vectors derive from the text.
fn mock_service() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path = line.split_whitespace().nth(1).unwrap_or("").to_owned();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let reply = if path == "/health" {
                    json!({"status": "ok", "dim": 2})
                } else {
                    let req: Value = serde_json::from_slice(&body).unwrap();
                    let vectors: Vec<[f64; 2]> = req["texts"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|t| {
                            let t = t.as_str().unwrap();
                            [t.len() as f64, t.split_whitespace().count() as f64]
                        })
                        .collect();
                    json!({"vectors": vectors, "dim": 2})
                };
                let text = reply.to_string();
                let _ = write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    url
}

#[test]
fn embeddings_from_a_service() {
    let url = mock_service();
    let out = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "embed",
            "--config",
            &config_arg(),
            "--embed-source",
            "service",
            "--embed-url",
            &url,
        ],
        out.path(),
    );
    let text = String::from_utf8(read(&out.path().join("embeddings.jsonl"))).unwrap();
    assert_eq!(text.lines().count(), 792);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["vector"].as_array().unwrap().len(), 2);
}

#[test]
fn unreachable_service_exits_4() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let out = tempfile::tempdir().unwrap();
    let url = format!("http://127.0.0.1:{port}");
    let o = reasonpath(
        &[
            "embed",
            "--config",
            &config_arg(),
            "--embed-source",
            "service",
            "--embed-url",
            &url,
        ],
        out.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn report_without_fragments_is_a_data_error() {
    let out = tempfile::tempdir().unwrap();
    let o = reasonpath(&["report", "--config", &config_arg()], out.path());
    assert_eq!(o.status.code(), Some(3));
}
