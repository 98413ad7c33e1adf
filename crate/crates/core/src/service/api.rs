//! Request and response bodies of the HTTP API. Shared by the server, the
//! schema export and the Python bindings so the wire format has one source.

use chrono::{DateTime, Utc};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{PacketSpec, ServiceError, Session};
use crate::interaction::DropTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CreateSessionRequest {
    /// Id of a dataset registered in the service config.
    pub dataset: String,
    pub goal: String,
}

/// A drop. `packet` is either a literal drag packet or a selection the
/// server resolves against the session (leaf ids or chart marks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DropRequest {
    pub packet: PacketSpec,
    pub target: DropTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl From<&ServiceError> for ErrorBody {
    fn from(e: &ServiceError) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionSummary {
    pub id: String,
    pub dataset: String,
    pub goal: String,
    pub revision: u64,
    pub paragraphs: usize,
    pub charts: usize,
    pub updated_at: DateTime<Utc>,
}

impl From<&Session> for SessionSummary {
    fn from(s: &Session) -> Self {
        Self {
            id: s.id().to_string(),
            dataset: s.dataset().name().to_string(),
            goal: s.goal().to_string(),
            revision: s.revision(),
            paragraphs: s.document().paragraphs.len(),
            charts: s.charts().len(),
            updated_at: s.updated_at(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetInfo {
    pub id: String,
    pub name: String,
    pub description: String,
    pub rows: usize,
    pub fields: Vec<crate::dataset::FieldDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SaveResponse {
    pub path: String,
}

impl DatasetInfo {
    pub fn new(id: impl Into<String>, ds: &crate::dataset::Dataset) -> Self {
        Self {
            id: id.into(),
            name: ds.name().to_string(),
            description: ds.nl_description().to_string(),
            rows: ds.row_count(),
            fields: ds.schema().to_vec(),
        }
    }
}
