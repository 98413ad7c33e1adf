//! Headless replay of a scripted interaction sequence.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;

use super::{create_session, post_drop, ServiceError, Session, StateDelta};
use crate::dataset::DatasetSource;
use crate::interaction::{packet_from_chart, ChartSelection, DragPacket, DropTarget, InteractionError};
use crate::llm::Provider;
use crate::narrative::packet_from_text;

/// How a step obtains its packet: given verbatim, built from leaves of the
/// current document, or built from marks/axes of an existing chart.
///
/// A bare drag packet (no wrapper) is also accepted on input and means
/// `Packet`. Output always uses the tagged form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", from = "PacketSpecRepr")]
pub enum PacketSpec {
    Packet(DragPacket),
    Text {
        leaves: Vec<String>,
    },
    Chart {
        chart: String,
        #[serde(flatten)]
        selection: ChartSelection,
    },
}

#[derive(Deserialize, JsonSchema)]
#[serde(untagged)]
enum PacketSpecRepr {
    Bare(DragPacket),
    Tagged(TaggedSpec),
}

#[derive(Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
enum TaggedSpec {
    Packet(DragPacket),
    Text {
        leaves: Vec<String>,
    },
    Chart {
        chart: String,
        #[serde(flatten)]
        selection: ChartSelection,
    },
}

impl From<PacketSpecRepr> for PacketSpec {
    fn from(repr: PacketSpecRepr) -> Self {
        match repr {
            PacketSpecRepr::Bare(p) | PacketSpecRepr::Tagged(TaggedSpec::Packet(p)) => PacketSpec::Packet(p),
            PacketSpecRepr::Tagged(TaggedSpec::Text { leaves }) => PacketSpec::Text { leaves },
            PacketSpecRepr::Tagged(TaggedSpec::Chart { chart, selection }) => PacketSpec::Chart { chart, selection },
        }
    }
}

impl JsonSchema for PacketSpec {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "PacketSpec".into()
    }

    fn json_schema(generator: &mut schemars::SchemaGenerator) -> schemars::Schema {
        PacketSpecRepr::json_schema(generator)
    }
}

impl PacketSpec {
    pub fn resolve(&self, session: &Session) -> Result<DragPacket, ServiceError> {
        match self {
            PacketSpec::Packet(p) => Ok(p.clone()),
            PacketSpec::Text { leaves } => {
                let ids: Vec<&str> = leaves.iter().map(String::as_str).collect();
                let key_field = &session.dataset().key_field().name;
                Ok(packet_from_text(session.document(), &ids, key_field)?)
            }
            PacketSpec::Chart { chart, selection } => {
                let spec = session
                    .chart(chart)
                    .ok_or_else(|| InteractionError::UnknownChart(chart.clone()))?;
                packet_from_chart(spec, session.dataset(), selection)
                    .map_err(|e| InteractionError::Packet(e).into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReplayStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub packet: PacketSpec,
    pub target: DropTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReplayScript {
    pub dataset: DatasetSource,
    pub goal: String,
    #[serde(default)]
    pub steps: Vec<ReplayStep>,
}

impl ReplayScript {
    /// Reads a script; a relative dataset path resolves against the
    /// script's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut script: ReplayScript =
            serde_json::from_str(&text).map_err(|e| ServiceError::Json(e.to_string()))?;
        if script.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                script.dataset.path = dir.join(&script.dataset.path);
            }
        }
        Ok(script)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub packet: DragPacket,
    pub target: DropTarget,
    pub delta: StateDelta,
}

#[derive(Debug)]
pub struct ReplayLog {
    pub session: Session,
    pub steps: Vec<StepRecord>,
}

/// Where a replay stopped. Step 0 is session creation.
#[derive(Debug)]
pub struct ReplayFailure {
    pub step: usize,
    pub label: Option<String>,
    pub error: ServiceError,
    pub completed: Vec<StepRecord>,
    pub session: Option<Box<Session>>,
}

impl fmt::Display for ReplayFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.label, self.step) {
            (_, 0) => write!(f, "session creation failed: {}", self.error),
            (Some(label), n) => write!(f, "step {n} ({label}) failed: {}", self.error),
            (None, n) => write!(f, "step {n} failed: {}", self.error),
        }
    }
}

impl std::error::Error for ReplayFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn replay(
    script: &ReplayScript,
    provider: &dyn Provider,
    max_retries: u32,
) -> Result<ReplayLog, ReplayFailure> {
    let fail_at_start = |error: ServiceError| ReplayFailure {
        step: 0,
        label: None,
        error,
        completed: Vec::new(),
        session: None,
    };
    let dataset = script.dataset.load(None).map_err(|e| fail_at_start(e.into()))?;
    let mut session =
        create_session(dataset, &script.goal, provider, max_retries).map_err(fail_at_start)?;

    let mut completed = Vec::new();
    for (i, step) in script.steps.iter().enumerate() {
        let result = step.packet.resolve(&session).and_then(|packet| {
            post_drop(&mut session, &packet, &step.target, provider, max_retries)
                .map(|delta| (packet, delta))
        });
        match result {
            Ok((packet, delta)) => completed.push(StepRecord {
                step: i + 1,
                label: step.label.clone(),
                packet,
                target: step.target.clone(),
                delta,
            }),
            Err(error) => {
                return Err(ReplayFailure {
                    step: i + 1,
                    label: step.label.clone(),
                    error,
                    completed,
                    session: Some(Box::new(session)),
                })
            }
        }
    }
    Ok(ReplayLog {
        session,
        steps: completed,
    })
}
