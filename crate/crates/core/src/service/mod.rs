//! Session state and the operations the HTTP layer, CLI and bindings share.

pub mod api;
mod config;
mod replay;
mod store;

pub use config::{build_provider, DatasetEntry, ProviderConfig, ServiceConfig};
pub use replay::{replay, PacketSpec, ReplayFailure, ReplayLog, ReplayScript, ReplayStep, StepRecord};
pub use store::{load_session, save_session, session_from_json, session_to_json, SCHEMA_VERSION};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use schemars::JsonSchema;
use thiserror::Error;

use crate::chartspec::{check_chart, ChartSpec};
use crate::dataset::{Dataset, DatasetError};
use crate::interaction::{route_drop, DragPacket, DropEffect, DropTarget, InteractionError, PacketError};
use crate::llm::{self, build_init_prompt, Generation, LlmError, PromptBundle, Provider, ProviderError, ProviderKind};
use crate::narrative::{
    renumber_chart_refs, ChartNumbering, NarrativeDocument, SelectionError, Validator,
};

/// One provider exchange, kept so later prompts can include the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TranscriptTurn {
    pub request: String,
    pub response: String,
    pub fixture_key: String,
    pub attempts: u32,
    pub provider: ProviderKind,
}

impl TranscriptTurn {
    pub fn from_generation(bundle: &PromptBundle, generation: &Generation) -> Self {
        Self {
            request: bundle.request_summary(),
            response: generation.raw_text.clone(),
            fixture_key: bundle.fixture_key(),
            attempts: generation.attempts,
            provider: generation.provider,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Session {
    id: String,
    dataset: Dataset,
    goal: String,
    document: NarrativeDocument,
    charts: Vec<ChartSpec>,
    transcript: Vec<TranscriptTurn>,
    revision: u64,
    created_at: DateTime<Utc>,
    updated_at: DateTime<Utc>,
}

impl Session {
    /// A session with no narrative yet. Fails on a blank goal.
    pub fn new_empty(dataset: Dataset, goal: &str) -> Result<Self, ServiceError> {
        if goal.trim().is_empty() {
            return Err(ServiceError::InvalidGoal);
        }
        let now = Utc::now();
        Ok(Self {
            id: uuid::Uuid::new_v4().to_string(),
            dataset,
            goal: goal.trim().to_string(),
            document: NarrativeDocument::default(),
            charts: Vec::new(),
            transcript: Vec::new(),
            revision: 0,
            created_at: now,
            updated_at: now,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn document(&self) -> &NarrativeDocument {
        &self.document
    }

    pub(crate) fn document_mut(&mut self) -> &mut NarrativeDocument {
        &mut self.document
    }

    pub fn charts(&self) -> &[ChartSpec] {
        &self.charts
    }

    pub fn chart(&self, id: &str) -> Option<&ChartSpec> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub(crate) fn charts_mut(&mut self) -> &mut Vec<ChartSpec> {
        &mut self.charts
    }

    pub fn transcript(&self) -> &[TranscriptTurn] {
        &self.transcript
    }

    pub(crate) fn transcript_mut(&mut self) -> &mut Vec<TranscriptTurn> {
        &mut self.transcript
    }

    /// Number of committed mutations since creation.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn updated_at(&self) -> DateTime<Utc> {
        self.updated_at
    }

    /// Display numbers as currently assigned to the document's references.
    pub fn numbering(&self) -> ChartNumbering {
        let mut numbering = ChartNumbering::new();
        for r in self.document.chart_refs() {
            if let Some(n) = r.display_number {
                numbering.entry(r.chart_id.clone()).or_insert(n);
            }
        }
        numbering
    }

    /// Id for the next new chart: one past the highest `chart-<n>` in use.
    pub fn next_chart_id(&self) -> String {
        let max = self
            .charts
            .iter()
            .filter_map(|c| c.id.strip_prefix("chart-")?.parse::<u32>().ok())
            .max()
            .unwrap_or(0);
        format!("chart-{}", max + 1)
    }

    fn touch(&mut self) {
        self.revision += 1;
        self.updated_at = Utc::now();
    }

    /// Checks every cross-structure invariant; returns one message per
    /// violation.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.goal.trim().is_empty() {
            problems.push("goal is empty".to_string());
        }
        for id in self.document.duplicate_ids() {
            problems.push(format!("duplicate id {id:?}"));
        }
        for leaf in self.document.leaves() {
            if leaf.text.trim().is_empty() {
                problems.push(format!("leaf {} has empty text", leaf.id));
            }
            for f in leaf.fields.iter().chain(leaf.values.iter().map(|v| &v.field)) {
                if self.dataset.field(f).is_none() {
                    problems.push(format!("leaf {} names unknown field {f:?}", leaf.id));
                }
            }
        }
        let mut chart_ids = std::collections::HashSet::new();
        for chart in &self.charts {
            if !chart_ids.insert(chart.id.as_str()) {
                problems.push(format!("duplicate chart id {:?}", chart.id));
            }
            for p in check_chart(chart, &self.dataset) {
                problems.push(format!("{}: {p}", chart.id));
            }
        }
        for r in self.document.chart_refs() {
            if !chart_ids.contains(r.chart_id.as_str()) {
                problems.push(format!("reference to unknown chart {:?}", r.chart_id));
            }
        }
        let mut renumbered = self.document.clone();
        renumber_chart_refs(&mut renumbered);
        if renumbered != self.document {
            problems.push("chart references are not numbered by first appearance".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// What a successful drop changed, as sent to clients.
#[derive(Debug, Clone, PartialEq, Serialize, JsonSchema)]
pub struct StateDelta {
    pub session_id: String,
    pub revision: u64,
    pub effect: DropEffect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_ref_paragraph: Option<String>,
    pub numbering: ChartNumbering,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("goal must not be empty")]
    InvalidGoal,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Interaction(#[from] InteractionError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("session violates invariants: {}", .0.join("; "))]
    InvalidSession(Vec<String>),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("invalid selection: {0}")]
    Selection(#[from] SelectionError),
}

impl ServiceError {
    fn provider_error(&self) -> Option<&ProviderError> {
        match self {
            ServiceError::Llm(LlmError::Provider(p))
            | ServiceError::Interaction(InteractionError::Llm(LlmError::Provider(p))) => Some(p),
            _ => None,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        if let Some(p) = self.provider_error() {
            return match p {
                ProviderError::Transport(_) | ProviderError::Exhausted => "transport_error",
                ProviderError::Auth(_) => "provider_auth",
                ProviderError::MissingFixture(_) => "missing_fixture",
            };
        }
        match self {
            ServiceError::InvalidGoal => "invalid_goal",
            ServiceError::Dataset(_) => "dataset_error",
            ServiceError::Interaction(e) => match e {
                InteractionError::Packet(PacketError::UnknownKey(_)) => "unknown_key",
                InteractionError::Packet(PacketError::UnknownField(_)) => "unknown_field",
                InteractionError::Packet(_) => "invalid_packet",
                InteractionError::UnknownChart(_) => "unknown_chart",
                InteractionError::Chart(_) => "chart_error",
                InteractionError::Llm(_) => "llm_failure",
            },
            ServiceError::Llm(_) => "llm_failure",
            ServiceError::Io { .. } => "io_error",
            ServiceError::Json(_) => "malformed_json",
            ServiceError::SchemaVersionMismatch { .. } => "schema_version_mismatch",
            ServiceError::InvalidSession(_) => "invalid_session",
            ServiceError::Config(_) => "config_error",
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownDataset(_) => "unknown_dataset",
            ServiceError::Selection(_) => "invalid_selection",
        }
    }

    /// Process exit code: 2 for configuration, I/O and transport problems,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.provider_error().is_some() {
            return 2;
        }
        match self {
            ServiceError::Config(_) | ServiceError::Io { .. } => 2,
            _ => 1,
        }
    }
}

/// Creates a session and generates its opening narrative. Nothing is
/// returned unless generation succeeds.
pub fn create_session(
    dataset: Dataset,
    goal: &str,
    provider: &dyn Provider,
    max_retries: u32,
) -> Result<Session, ServiceError> {
    let mut session = Session::new_empty(dataset, goal)?;
    let bundle = build_init_prompt(&session);
    let generation = {
        let validator = Validator::new(&session.dataset);
        llm::generate(&bundle, &validator, provider, max_retries)?
    };
    let turn = TranscriptTurn::from_generation(&bundle, &generation);
    session.document.append_paragraphs(generation.document);
    renumber_chart_refs(&mut session.document);
    session.transcript.push(turn);
    Ok(session)
}

/// Applies a drop. On error the session is left exactly as it was.
pub fn post_drop(
    session: &mut Session,
    packet: &DragPacket,
    target: &DropTarget,
    provider: &dyn Provider,
    max_retries: u32,
) -> Result<StateDelta, ServiceError> {
    let outcome = route_drop(session, packet, target, provider, max_retries)?;
    session.touch();
    Ok(StateDelta {
        session_id: session.id.clone(),
        revision: session.revision,
        effect: outcome.effect,
        chart_ref_paragraph: outcome.chart_ref_paragraph,
        numbering: outcome.numbering,
        warnings: outcome.warnings,
        updated_at: session.updated_at,
    })
}
