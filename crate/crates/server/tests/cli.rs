use std::io::{BufRead, BufReader, Read, Write};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

const GOAL: &str = "Find a neighborhood with a good home for a family of four";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/seattle")
}

fn bimodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bimodal")).args(args).output().unwrap()
}

fn mock_args() -> Vec<String> {
    vec!["--fixtures".into(), fixtures().join("mock").display().to_string()]
}

fn run(extra: &[&str]) -> Output {
    let mut args = mock_args();
    args.extend(extra.iter().map(|s| s.to_string()));
    bimodal(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn replay_then_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("session.json");
    let script = fixtures().join("scenario.json");
    let replayed = run(&["replay", script.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(replayed.status.code(), Some(0), "{}", String::from_utf8_lossy(&replayed.stderr));
    let log: Value = serde_json::from_slice(&replayed.stdout).unwrap();
    assert_eq!((log["paragraphs"].as_u64(), log["charts"].as_u64()), (Some(3), Some(2)));
    assert_eq!(log["steps"].as_array().unwrap().len(), 7);

    let checked = bimodal(&["check", out.to_str().unwrap()]);
    assert_eq!(checked.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&checked.stdout).unwrap();
    assert_eq!(report["mismatches"], json!([]));
}

#[test]
fn check_flags_ungrounded_claims() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("s.json");
    let generated = run(&["generate", "--dataset", fixtures().join("source.json").to_str().unwrap(), "--goal", GOAL, "--save", saved.to_str().unwrap()]);
    assert_eq!(generated.status.code(), Some(0));
    let text = std::fs::read_to_string(&saved).unwrap();
    // 98112 averages 4.2 bedrooms; claim 5.0 instead.
    let tampered = text.replacen("\"value\": 4.2", "\"value\": 5.0", 1);
    assert_ne!(tampered, text);
    std::fs::write(&saved, tampered).unwrap();
    let checked = bimodal(&["check", saved.to_str().unwrap()]);
    assert_eq!(checked.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&checked.stdout).unwrap();
    assert_eq!(report["mismatches"][0]["field"], "avg_bedrooms");
}

#[test]
fn generate_formats() {
    let source = fixtures().join("source.json");
    let source = source.to_str().unwrap();
    let text = run(&["generate", "--dataset", source, "--goal", GOAL]);
    assert_eq!(text.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&text.stdout).starts_with("For a family of four"));
    let tagged = run(&["generate", "--dataset", source, "--goal", GOAL, "--format", "tagged"]);
    assert!(String::from_utf8_lossy(&tagged.stdout).contains("[L3] The number of bedrooms"));
    let doc = run(&["generate", "--dataset", source, "--goal", GOAL, "--format", "json"]);
    let doc: Value = serde_json::from_slice(&doc.stdout).unwrap();
    assert_eq!(doc["paragraphs"].as_array().unwrap().len(), 1);
}

#[test]
fn exit_codes() {
    let source = fixtures().join("source.json");
    let source = source.to_str().unwrap();
    // Transport class: no fixture for this request.
    let missing = run(&["generate", "--dataset", source, "--goal", "something else"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing_fixture"));
    // Configuration: no provider at all.
    assert_eq!(bimodal(&["generate", "--dataset", source, "--goal", GOAL]).status.code(), Some(2));
    // Validation: blank goal.
    assert_eq!(run(&["generate", "--dataset", source, "--goal", " "]).status.code(), Some(1));
    // Remote provider without its key variable set.
    let remote = bimodal(&["--endpoint", "http://127.0.0.1:9", "--model", "m", "--api-key-env", "BIMODAL_UNSET_KEY_VAR", "generate", "--dataset", source, "--goal", GOAL]);
    assert_eq!(remote.status.code(), Some(2));

    // Replay failure at a step: partial log on stdout, exit 1.
    let dir = tempfile::tempdir().unwrap();
    let mut script: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("scenario.json")).unwrap()).unwrap();
    script["dataset"]["path"] = json!(fixtures().join("seattle_homes.csv"));
    script["steps"].as_array_mut().unwrap().insert(1, json!({
        "packet": {"packet": {"source": "text", "fields": ["school_rating"], "layer": 2}},
        "target": "show_me_more"
    }));
    let path = dir.path().join("bad.json");
    std::fs::write(&path, script.to_string()).unwrap();
    let failed = run(&["replay", path.to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(1), "{}", String::from_utf8_lossy(&failed.stderr));
    let log: Value = serde_json::from_slice(&failed.stdout).unwrap();
    assert_eq!(log["failed_step"], 2);
    assert_eq!(log["error"]["code"], "unknown_field");
    assert_eq!(log["steps"].as_array().unwrap().len(), 1);

    // Corrupt and version-mismatched session files.
    let bad = dir.path().join("bad-session.json");
    std::fs::write(&bad, r#"{"schema_version": 9, "session": {}}"#).unwrap();
    let out = bimodal(&["check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version_mismatch"));
    assert_eq!(bimodal(&["check", "/nonexistent/session.json"]).status.code(), Some(2));
    assert_eq!(bimodal(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn schema_subcommand() {
    let names = bimodal(&["schema"]);
    let names = String::from_utf8(names.stdout).unwrap();
    assert!(names.lines().any(|l| l == "session_file"));
    let s: Value = serde_json::from_slice(&bimodal(&["schema", "drag_packet"]).stdout).unwrap();
    assert_eq!(s["title"], "DragPacket");
    assert_eq!(bimodal(&["schema", "nope"]).status.code(), Some(1));
}

#[test]
fn serve_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        json!({
            "provider": {"kind": "mock", "fixtures_dir": fixtures().join("mock")},
            "datasets": [{"id": "seattle", "source": fixtures().join("source.json")}],
            "session_dir": "sessions",
            "bind": "127.0.0.1:1"
        })
        .to_string(),
    )
    .unwrap();
    // --bind overrides the config value.
    let mut child = Command::new(env!("CARGO_BIN_EXE_bimodal"))
        .args(["--config", config.to_str().unwrap(), "serve", "--bind", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").unwrap_or_else(|| panic!("{line}")).to_string();

    let post = |path: &str, body: &str| {
        let mut stream = std::net::TcpStream::connect(&addr).unwrap();
        write!(stream, "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        response
    };
    let created = post("/sessions", &json!({"dataset": "seattle", "goal": GOAL}).to_string());
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(created.starts_with("HTTP/1.1 201"), "{created}");
    assert!(created.contains("\"paragraphs\""));
}
