//! Regenerates the mock-provider fixtures for the Seattle scenario.
//!
//! Replays `fixtures/seattle/scenario.json` with the authored responses in
//! `fixtures/seattle/responses/` (in call order), then stores each response
//! under the digest of the request that consumed it.
//!
//!     cargo run -p bimodal-core --example build_fixtures

use std::error::Error;
use std::path::Path;

use bimodal_core::llm::ScriptedProvider;
use bimodal_core::service::{replay, ReplayScript};

const RESPONSES: [&str; 3] = ["init", "i1", "i7"];

fn main() -> Result<(), Box<dyn Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/seattle");
    let script = ReplayScript::from_file(dir.join("scenario.json"))?;
    let responses = RESPONSES
        .iter()
        .map(|name| std::fs::read_to_string(dir.join("responses").join(format!("{name}.json"))))
        .collect::<Result<Vec<_>, _>>()?;

    let provider = ScriptedProvider::new(responses.clone());
    replay(&script, &provider, 0)?;
    let requests = provider.requests();
    if requests.len() != RESPONSES.len() {
        return Err(format!("expected {} provider calls, saw {}", RESPONSES.len(), requests.len()).into());
    }

    let mock_dir = dir.join("mock");
    std::fs::create_dir_all(&mock_dir)?;
    for entry in std::fs::read_dir(&mock_dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            std::fs::remove_file(path)?;
        }
    }
    for ((name, request), response) in RESPONSES.iter().zip(&requests).zip(&responses) {
        std::fs::write(mock_dir.join(format!("{}.json", request.fixture_key)), response)?;
        println!("{name:<5} {}", request.fixture_key);
    }
    Ok(())
}
