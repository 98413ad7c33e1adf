#![allow(dead_code)]

use std::path::PathBuf;

use bimodal_core::dataset::{Cell, DatasetSource};
use bimodal_core::llm::MockProvider;
use bimodal_core::service::ReplayScript;
use bimodal_core::{Dataset, FieldDescriptor, FieldKind};
use rand::Rng;

pub fn seattle_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/seattle")
}

pub fn seattle() -> Dataset {
    DatasetSource::from_json_file(seattle_dir().join("source.json"))
        .and_then(|s| s.load(None))
        .expect("seattle fixture loads")
}

pub fn mock_provider() -> MockProvider {
    MockProvider::from_dir(seattle_dir().join("mock")).expect("mock fixtures load")
}

pub fn scenario() -> ReplayScript {
    ReplayScript::from_file(seattle_dir().join("scenario.json")).expect("scenario loads")
}

pub const SEATTLE_NUMERIC: [&str; 5] = [
    "avg_price",
    "avg_bedrooms",
    "avg_bathrooms",
    "avg_house_size",
    "avg_lot_size",
];

/// Builds a table keyed by `r0..r{n-1}` with numeric columns `c0..`.
pub fn table(columns: &[Vec<f64>]) -> Dataset {
    let n = columns[0].len();
    let mut schema = vec![FieldDescriptor::new("id", FieldKind::Key)];
    schema.extend((0..columns.len()).map(|c| FieldDescriptor::new(format!("c{c}"), FieldKind::Numeric)));
    let rows = (0..n)
        .map(|i| {
            let mut row = vec![Cell::Text(format!("r{i}"))];
            row.extend(columns.iter().map(|col| Cell::Number(col[i])));
            row
        })
        .collect();
    Dataset::new("random", "random table", schema, rows).expect("valid table")
}

/// Random columns of varying scale and offset; each column has at least two
/// distinct values.
pub fn random_columns<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..cols)
        .map(|_| {
            let scale = 10f64.powi(rng.gen_range(-2..=5));
            let offset = rng.gen_range(-3.0..3.0) * scale;
            loop {
                let col: Vec<f64> = (0..rows).map(|_| offset + rng.gen_range(-1.0..1.0) * scale).collect();
                if col.iter().any(|v| *v != col[0]) {
                    break col;
                }
            }
        })
        .collect()
}

/// Minimal chat-completions server: answers one request per entry in
/// `replies` with that text as the assistant message, then exits.
pub fn serve_chat(replies: Vec<String>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for reply in replies {
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
            bodies.push(String::from_utf8(body).unwrap());
            let payload = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": reply}}]}).to_string();
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            reader.get_mut().write_all(response.as_bytes()).unwrap();
        }
        bodies
    });
    (url, handle)
}
