//! Versioned JSON persistence for sessions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ServiceError, Session};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    schema_version: u64,
    session: &'a Session,
}

#[derive(Deserialize)]
struct Envelope {
    session: Session,
}

/// Serializes a session with its schema version. Output depends only on the
/// session state, so two equal sessions give identical bytes.
pub fn session_to_json(session: &Session) -> String {
    serde_json::to_string_pretty(&EnvelopeRef {
        schema_version: SCHEMA_VERSION,
        session,
    })
    .expect("session serializes")
}

/// Parses and checks a saved session: version first, then structure, then
/// every invariant.
pub fn session_from_json(text: &str) -> Result<Session, ServiceError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| ServiceError::Json(e.to_string()))?;
    let found = raw
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ServiceError::Json("missing schema_version".to_string()))?;
    if found != SCHEMA_VERSION {
        return Err(ServiceError::SchemaVersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    let envelope: Envelope =
        serde_json::from_value(raw).map_err(|e| ServiceError::Json(e.to_string()))?;
    envelope
        .session
        .validate()
        .map_err(ServiceError::InvalidSession)?;
    Ok(envelope.session)
}

/// Writes via a temporary file in the same directory and renames it over the
/// target, so readers never see a half-written session.
pub fn save_session(session: &Session, path: impl AsRef<Path>) -> Result<(), ServiceError> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| ServiceError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, session_to_json(session)).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_session(path: impl AsRef<Path>) -> Result<Session, ServiceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    session_from_json(&text)
}
