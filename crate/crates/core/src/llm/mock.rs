//! Offline providers for tests and headless runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use super::provider::{CompletionRequest, Provider, ProviderError, ProviderKind};

/// Answers from `<digest>.json` files, keyed by the request's fixture key.
/// Identical requests always get byte-identical answers.
#[derive(Debug, Default)]
pub struct MockProvider {
    fixtures: HashMap<String, String>,
    hits: Mutex<Vec<String>>,
    misses: Mutex<Vec<String>>,
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.json` file in `dir`; the file stem is the digest and
    /// the file content is the raw provider response.
    pub fn from_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut fixtures = HashMap::new();
        for entry in std::fs::read_dir(dir.as_ref())? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                fixtures.insert(stem.to_string(), std::fs::read_to_string(&path)?);
            }
        }
        Ok(Self {
            fixtures,
            ..Self::default()
        })
    }

    pub fn with_fixture(mut self, digest: impl Into<String>, raw: impl Into<String>) -> Self {
        self.fixtures.insert(digest.into(), raw.into());
        self
    }

    pub fn fixture_count(&self) -> usize {
        self.fixtures.len()
    }

    /// Digests served so far, in call order.
    pub fn hits(&self) -> Vec<String> {
        self.hits.lock().expect("mock lock").clone()
    }

    /// Digests requested without a fixture.
    pub fn misses(&self) -> Vec<String> {
        self.misses.lock().expect("mock lock").clone()
    }
}

impl Provider for MockProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        match self.fixtures.get(&request.fixture_key) {
            Some(raw) => {
                self.hits.lock().expect("mock lock").push(request.fixture_key.clone());
                Ok(raw.clone())
            }
            None => {
                self.misses.lock().expect("mock lock").push(request.fixture_key.clone());
                Err(ProviderError::MissingFixture(request.fixture_key.clone()))
            }
        }
    }
}

/// Plays back a fixed sequence of replies regardless of the request, and
/// records every request it saw.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<Result<String, ProviderError>>>,
    requests: Mutex<Vec<CompletionRequest>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            replies: Mutex::new(replies.into_iter().map(|r| Ok(r.into())).collect()),
            requests: Mutex::default(),
        }
    }

    pub fn push_error(&self, err: ProviderError) {
        self.replies.lock().expect("script lock").push_back(Err(err));
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("script lock").clone()
    }

    pub fn call_count(&self) -> usize {
        self.requests.lock().expect("script lock").len()
    }
}

impl Provider for ScriptedProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        self.requests.lock().expect("script lock").push(request.clone());
        self.replies
            .lock()
            .expect("script lock")
            .pop_front()
            .unwrap_or(Err(ProviderError::Exhausted))
    }
}

/// Fails every call with the same error and counts the calls.
#[derive(Debug)]
pub struct FailingProvider {
    error: ProviderError,
    calls: Mutex<usize>,
}

impl FailingProvider {
    pub fn new(error: ProviderError) -> Self {
        Self {
            error,
            calls: Mutex::new(0),
        }
    }

    pub fn call_count(&self) -> usize {
        *self.calls.lock().expect("failing lock")
    }
}

impl Provider for FailingProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn complete(&self, _request: &CompletionRequest) -> Result<String, ProviderError> {
        *self.calls.lock().expect("failing lock") += 1;
        Err(self.error.clone())
    }
}
