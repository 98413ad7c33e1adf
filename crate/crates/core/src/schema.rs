//! JSON Schemas for every document that crosses a process boundary.

use schemars::{JsonSchema, Schema};
use serde::Serialize;
use serde_json::Value;

use crate::chartspec::ChartSpec;
use crate::interaction::{DragPacket, DropTarget};
use crate::narrative::{GroundingReport, NarrativeDocument};
use crate::service::api::{CreateSessionRequest, DatasetInfo, DropRequest, ErrorBody, SaveResponse, SessionSummary};
use crate::service::{ReplayScript, ServiceConfig, Session, StateDelta};

/// The on-disk session envelope. Only used to describe the format.
#[derive(Serialize, JsonSchema)]
#[allow(dead_code)]
struct SessionFile {
    #[schemars(range(min = 1, max = 1))]
    schema_version: u64,
    session: Session,
}

/// Names accepted by [`schema`], in a stable order.
pub const SCHEMA_NAMES: &[&str] = &[
    "drag_packet",
    "drop_target",
    "narrative_document",
    "chart_spec",
    "state_delta",
    "session",
    "session_file",
    "replay_script",
    "service_config",
    "create_session_request",
    "drop_request",
    "error_body",
    "session_summary",
    "dataset_info",
    "save_response",
    "grounding_report",
];

fn of<T: JsonSchema>() -> Schema {
    schemars::schema_for!(T)
}

pub fn schema(name: &str) -> Option<Value> {
    let s = match name {
        "drag_packet" => of::<DragPacket>(),
        "drop_target" => of::<DropTarget>(),
        "narrative_document" => of::<NarrativeDocument>(),
        "chart_spec" => of::<ChartSpec>(),
        "state_delta" => of::<StateDelta>(),
        "session" => of::<Session>(),
        "session_file" => of::<SessionFile>(),
        "replay_script" => of::<ReplayScript>(),
        "service_config" => of::<ServiceConfig>(),
        "create_session_request" => of::<CreateSessionRequest>(),
        "drop_request" => of::<DropRequest>(),
        "error_body" => of::<ErrorBody>(),
        "session_summary" => of::<SessionSummary>(),
        "dataset_info" => of::<DatasetInfo>(),
        "save_response" => of::<SaveResponse>(),
        "grounding_report" => of::<GroundingReport>(),
        _ => return None,
    };
    Some(s.to_value())
}
