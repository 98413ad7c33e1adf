use std::path::PathBuf;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use bimodal_core::dataset::DatasetSource;
use bimodal_core::llm::{CompletionRequest, MockProvider, Provider, ProviderError, ProviderKind, RemoteProvider};
use bimodal_core::Dataset;
use bimodal_server::{router, AppState};
use http_body_util::BodyExt;
use indexmap::IndexMap;
use serde_json::{json, Value};
use tower::ServiceExt;

const GOAL: &str = "Find a neighborhood with a good home for a family of four";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/seattle")
}

fn seattle() -> Dataset {
    DatasetSource::from_json_file(fixtures().join("source.json"))
        .and_then(|s| s.load(None))
        .unwrap()
}

fn mock() -> MockProvider {
    MockProvider::from_dir(fixtures().join("mock")).unwrap()
}

fn app_with(provider: Arc<dyn Provider>, session_dir: &std::path::Path, static_dir: Option<&std::path::Path>) -> Router {
    let mut datasets = IndexMap::new();
    datasets.insert("seattle".to_string(), seattle());
    router(Arc::new(AppState::new(provider, 2, datasets, session_dir)), static_dir)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => request.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({"dataset": "seattle", "goal": GOAL}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn scenario_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Arc::new(mock()), dir.path(), None);
    assert_eq!(call(&app, "GET", "/healthz", None).await.1, json!({"status": "ok"}));
    let (_, datasets) = call(&app, "GET", "/datasets", None).await;
    assert_eq!(datasets[0]["id"], "seattle");
    assert_eq!(datasets[0]["rows"], 24);

    let id = create(&app).await;
    let (_, session) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(session["document"]["paragraphs"].as_array().unwrap().len(), 1);
    assert!(!session.to_string().contains("api_key"));

    let drops = format!("/sessions/{id}/drops");
    let (status, d1) = call(&app, "POST", &drops, Some(json!({"packet": {"text": {"leaves": ["p1.s3.l2"]}}, "target": "tell_me_more"}))).await;
    assert_eq!(status, StatusCode::OK, "{d1}");
    assert_eq!(d1["revision"], 1);
    assert!(d1["effect"]["new_paragraph"]["id"] == "p2");

    // The packet endpoint resolves a selection without mutating anything.
    let (_, packet) = call(&app, "POST", &format!("/sessions/{id}/packets"), Some(json!({"text": {"leaves": ["p2.s2.l2"]}}))).await;
    assert_eq!(packet["fields"], json!(["avg_price"]));
    let (status, d2) = call(&app, "POST", &drops, Some(json!({"packet": {"packet": packet}, "target": "show_me_more"}))).await;
    assert_eq!(status, StatusCode::OK, "{d2}");
    assert_eq!(d2["effect"]["new_chart"]["title"], "Average House Price");
    assert_eq!(d2["numbering"], json!({"chart-1": 1}));

    // A bare drag packet works as the drop body's packet too.
    let (_, d3) = call(&app, "POST", &drops, Some(json!({
        "packet": {"source": "text", "keys": ["98101"], "layer": 1},
        "target": {"chart": "chart-1"}
    }))).await;
    assert_eq!(d3["effect"]["updated_chart"]["highlights"], json!(["98101"]));

    let (_, charts) = call(&app, "GET", &format!("/sessions/{id}/charts"), None).await;
    assert_eq!(charts.as_array().unwrap().len(), 1);
    let (_, list) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(list[0]["revision"], 3);

    let (status, saved) = call(&app, "POST", &format!("/sessions/{id}/save"), None).await;
    assert_eq!(status, StatusCode::OK);
    let path = PathBuf::from(saved["path"].as_str().unwrap());
    assert!(path.starts_with(dir.path()));

    // A fresh server finds the session on disk.
    let fresh = app_with(Arc::new(mock()), dir.path(), None);
    let (status, reloaded) = call(&fresh, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reloaded, call(&app, "GET", &format!("/sessions/{id}"), None).await.1);
}

#[tokio::test]
async fn errors_carry_codes_and_leave_state_alone() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Arc::new(mock()), dir.path(), None);
    let id = create(&app).await;
    let drops = format!("/sessions/{id}/drops");
    let (_, before) = call(&app, "GET", &format!("/sessions/{id}"), None).await;

    let cases = [
        ("GET", "/sessions/nope".to_string(), None, StatusCode::NOT_FOUND, "unknown_session"),
        ("GET", "/sessions/..%2Fetc".to_string(), None, StatusCode::NOT_FOUND, "unknown_session"),
        ("POST", "/sessions".into(), Some(json!({"dataset": "boston", "goal": "g"})), StatusCode::NOT_FOUND, "unknown_dataset"),
        ("POST", "/sessions".into(), Some(json!({"dataset": "seattle", "goal": "  "})), StatusCode::UNPROCESSABLE_ENTITY, "invalid_goal"),
        ("POST", "/sessions".into(), Some(json!({"dataset": "seattle", "goal": "unrecorded"})), StatusCode::BAD_GATEWAY, "missing_fixture"),
        ("POST", "/sessions".into(), Some(json!({"goal": "g"})), StatusCode::BAD_REQUEST, "malformed_json"),
        ("POST", drops.clone(), Some(json!({"packet": {"packet": {"source": "text", "fields": ["avg_price"], "layer": 2}}, "target": {"chart": "chart-7"}})), StatusCode::NOT_FOUND, "unknown_chart"),
        ("POST", drops.clone(), Some(json!({"packet": {"packet": {"source": "text", "fields": ["school_rating"], "layer": 2}}, "target": "show_me_more"})), StatusCode::UNPROCESSABLE_ENTITY, "unknown_field"),
        ("POST", drops.clone(), Some(json!({"packet": {"packet": {"source": "text", "keys": ["10001"], "layer": 1}}, "target": "show_me_more"})), StatusCode::UNPROCESSABLE_ENTITY, "unknown_key"),
        ("POST", drops.clone(), Some(json!({"packet": {"text": {"leaves": ["p9.s1.l1"]}}, "target": "show_me_more"})), StatusCode::UNPROCESSABLE_ENTITY, "invalid_selection"),
        ("POST", drops.clone(), Some(json!({"packet": {"packet": {"source": "text", "fields": ["avg_price"], "layer": 2}}, "target": "tell_me_more"})), StatusCode::BAD_GATEWAY, "missing_fixture"),
        ("GET", "/schemas/nope".into(), None, StatusCode::NOT_FOUND, "unknown_schema"),
    ];
    for (method, uri, body, status, code) in cases {
        let (got, err) = call(&app, method, &uri, body).await;
        assert_eq!((got, err["code"].as_str()), (status, Some(code)), "{method} {uri}: {err}");
        assert!(err["message"].is_string());
    }
    let (status, _) = call(&app, "POST", &drops, None).await;
    assert!(status.is_client_error());
    let (_, after) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(before, after);
}

#[tokio::test]
async fn schemas_are_served() {
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Arc::new(mock()), dir.path(), None);
    let (_, names) = call(&app, "GET", "/schemas", None).await;
    for name in names.as_array().unwrap() {
        let (status, s) = call(&app, "GET", &format!("/schemas/{}", name.as_str().unwrap()), None).await;
        assert_eq!(status, StatusCode::OK);
        assert!(s.get("$schema").is_some(), "{name}");
    }
    let (_, packet) = call(&app, "GET", "/schemas/drag_packet.json", None).await;
    assert_eq!(packet["properties"]["layer"]["$ref"], "#/$defs/SemanticLevel");
    assert_eq!(packet["$defs"]["SemanticLevel"]["maximum"], 4);
}

#[tokio::test]
async fn static_assets_are_served_beside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let assets = tempfile::tempdir().unwrap();
    std::fs::write(assets.path().join("index.html"), "<p>ui</p>").unwrap();
    let app = app_with(Arc::new(mock()), dir.path(), Some(assets.path()));
    assert_eq!(call(&app, "GET", "/index.html", None).await.1, "<p>ui</p>");
    assert_eq!(call(&app, "GET", "/healthz", None).await.0, StatusCode::OK);
}

/// Blocks its first call (after arming) until released.
struct GatedProvider {
    inner: MockProvider,
    gate: Mutex<Option<(Sender<()>, Receiver<()>)>>,
}

impl Provider for GatedProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let gate = self.gate.lock().unwrap().take();
        if let Some((entered, release)) = gate {
            entered.send(()).unwrap();
            release.recv().unwrap();
        }
        self.inner.complete(request)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_drops_apply_in_arrival_order() {
    let dir = tempfile::tempdir().unwrap();
    let provider = Arc::new(GatedProvider {
        inner: mock(),
        gate: Mutex::new(None),
    });
    let app = app_with(provider.clone(), dir.path(), None);
    let id = create(&app).await;
    let drops = format!("/sessions/{id}/drops");

    let (entered_tx, entered_rx) = channel();
    let (release_tx, release_rx) = channel();
    *provider.gate.lock().unwrap() = Some((entered_tx, release_rx));

    let first = tokio::spawn({
        let (app, drops) = (app.clone(), drops.clone());
        async move {
            call(&app, "POST", &drops, Some(json!({"packet": {"text": {"leaves": ["p1.s3.l2"]}}, "target": "tell_me_more"}))).await
        }
    });
    tokio::task::spawn_blocking(move || entered_rx.recv_timeout(Duration::from_secs(10)).unwrap())
        .await
        .unwrap();

    // The second drop selects a leaf that only exists once the first lands.
    let second = tokio::spawn({
        let (app, drops) = (app.clone(), drops.clone());
        async move {
            call(&app, "POST", &drops, Some(json!({"packet": {"text": {"leaves": ["p2.s2.l2"]}}, "target": "show_me_more"}))).await
        }
    });
    tokio::time::sleep(Duration::from_millis(100)).await;

    // Reads are not blocked by the in-flight drop and see the committed state.
    let (_, snapshot) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(snapshot["revision"], 0);
    assert!(!second.is_finished());

    release_tx.send(()).unwrap();
    let (s1, d1) = first.await.unwrap();
    let (s2, d2) = second.await.unwrap();
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK), "{d1} {d2}");
    assert_eq!(d1["revision"], 1);
    assert_eq!(d2["revision"], 2);
    assert_eq!(d2["chart_ref_paragraph"], "p2");
}

fn serve_chat(reply: String) -> (String, std::thread::JoinHandle<()>) {
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" || line.is_empty() {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let payload = json!({"choices": [{"message": {"role": "assistant", "content": reply}}]}).to_string();
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        );
        reader.get_mut().write_all(response.as_bytes()).unwrap();
    });
    (url, handle)
}

#[tokio::test]
async fn provider_key_never_leaves_the_process() {
    let secret = "sk-live-never-echo-9191";
    let init = std::fs::read_to_string(fixtures().join("responses/init.json")).unwrap();
    let (url, server) = serve_chat(init);
    let provider = RemoteProvider::new(&url, "m", secret.into(), Duration::from_secs(10));
    let dir = tempfile::tempdir().unwrap();
    let app = app_with(Arc::new(provider), dir.path(), None);

    let (status, created) = call(&app, "POST", "/sessions", Some(json!({"dataset": "seattle", "goal": GOAL}))).await;
    assert_eq!(status, StatusCode::CREATED);
    server.join().unwrap();
    let id = created["id"].as_str().unwrap();
    // No server left to answer: the follow-up fails with a transport error.
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/drops"), Some(json!({"packet": {"text": {"leaves": ["p1.s3.l2"]}}, "target": "tell_me_more"}))).await;
    assert_eq!((status, err["code"].as_str()), (StatusCode::BAD_GATEWAY, Some("transport_error")));
    call(&app, "POST", &format!("/sessions/{id}/save"), None).await;

    let mut seen = vec![created.to_string(), err.to_string()];
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        seen.push(std::fs::read_to_string(entry.unwrap().path()).unwrap());
    }
    for text in seen {
        assert!(!text.contains(secret));
    }
}
