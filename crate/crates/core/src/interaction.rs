//! Drag packets and drop routing.
//!
//! A [`DragPacket`] is a self-contained value: once built from text or from a
//! chart it carries no reference back to its origin, so any target accepts
//! it the same way. Routing answers text drops on "tell me more" with the
//! opposite side of the L2/L3 boundary (low-level observations get
//! analytical text, high-level ones get supporting data).

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;
use thiserror::Error;

use crate::chartspec::{self, ChartError, ChartSpec};
use crate::dataset::Dataset;
use crate::llm::{self, build_followup_prompt, LlmError, Provider};
use crate::narrative::{renumber_chart_refs, ChartNumbering, Literal, Paragraph, SemanticLevel, Validator};
use crate::service::{Session, TranscriptTurn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum PacketSource {
    Text,
    Chart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PacketValue {
    pub field: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DragPacket {
    pub source: PacketSource,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub values: Vec<PacketValue>,
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(rename = "layer")]
    pub level: SemanticLevel,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("packet carries no fields, values or keys")]
    Empty,
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("value {value:?} does not fit field {field:?}")]
    MalformedValue { field: String, value: String },
    #[error("chart packets are always level 2, got {0}")]
    ChartLevel(SemanticLevel),
    #[error("empty selection")]
    EmptySelection,
    #[error("mark {0:?} is not on the chart")]
    UnknownMark(String),
    #[error("field {0:?} is not an axis of the chart")]
    UnknownAxis(String),
}

impl DragPacket {
    pub fn validate(&self, dataset: &Dataset) -> Result<(), PacketError> {
        if self.fields.is_empty() && self.values.is_empty() && self.keys.is_empty() {
            return Err(PacketError::Empty);
        }
        if self.source == PacketSource::Chart && self.level != SemanticLevel::L2 {
            return Err(PacketError::ChartLevel(self.level));
        }
        if let Some(f) = self.fields.iter().find(|f| dataset.field(f).is_none()) {
            return Err(PacketError::UnknownField(f.clone()));
        }
        for v in &self.values {
            let field = dataset
                .field(&v.field)
                .ok_or_else(|| PacketError::UnknownField(v.field.clone()))?;
            if !dataset.literal_fits(field, &v.value.to_string()) {
                return Err(PacketError::MalformedValue {
                    field: v.field.clone(),
                    value: v.value.to_string(),
                });
            }
            if field.name == dataset.key_field().name && !dataset.has_key(&v.value.as_key()) {
                return Err(PacketError::UnknownKey(v.value.as_key()));
            }
        }
        if let Some(k) = self.keys.iter().find(|k| !dataset.has_key(k)) {
            return Err(PacketError::UnknownKey(k.clone()));
        }
        Ok(())
    }
}

/// What was grabbed on a chart: marks (row keys) and/or axis fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChartSelection {
    #[serde(default)]
    pub keys: Vec<String>,
    #[serde(default)]
    pub fields: Vec<String>,
}

/// Builds an L2 packet from a chart selection. Selecting only marks carries
/// every field the chart displays.
pub fn packet_from_chart(
    chart: &ChartSpec,
    dataset: &Dataset,
    selection: &ChartSelection,
) -> Result<DragPacket, PacketError> {
    if selection.keys.is_empty() && selection.fields.is_empty() {
        return Err(PacketError::EmptySelection);
    }
    if let Some(k) = selection.keys.iter().find(|k| !dataset.has_key(k)) {
        return Err(PacketError::UnknownMark(k.clone()));
    }
    if let Some(f) = selection.fields.iter().find(|f| !chart.displays(f)) {
        return Err(PacketError::UnknownAxis(f.clone()));
    }
    let fields = if selection.fields.is_empty() {
        chart.displayed_fields().into_iter().map(String::from).collect()
    } else {
        selection.fields.clone()
    };
    let text = if selection.keys.is_empty() {
        chart.title.clone()
    } else {
        selection.keys.join(", ")
    };
    Ok(DragPacket {
        source: PacketSource::Chart,
        fields,
        values: Vec::new(),
        keys: selection.keys.clone(),
        level: SemanticLevel::L2,
        text,
    })
}

/// Levels a "tell me more" answer should use: {L3, L4} for L1/L2 packets and
/// {L1, L2} for L3/L4 packets.
pub fn complement_levels(packet: &DragPacket) -> Vec<SemanticLevel> {
    if packet.level.is_low() {
        vec![SemanticLevel::L3, SemanticLevel::L4]
    } else {
        vec![SemanticLevel::L1, SemanticLevel::L2]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DropTarget {
    TellMeMore,
    ShowMeMore,
    Chart(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DropEffect {
    NewParagraph(Paragraph),
    NewChart(ChartSpec),
    UpdatedChart(ChartSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropOutcome {
    pub effect: DropEffect,
    /// Paragraph that received a new chart reference, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_ref_paragraph: Option<String>,
    pub numbering: ChartNumbering,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum InteractionError {
    #[error("invalid packet: {0}")]
    Packet(#[from] PacketError),
    #[error("unknown chart {0:?}")]
    UnknownChart(String),
    #[error("chart synthesis failed: {0}")]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Paragraph a text packet came from: the first leaf whose text equals the
/// packet text, else the first leaf whose text the packet text contains.
/// Chart packets have no anchor.
fn anchor_paragraph(session: &Session, packet: &DragPacket) -> Option<usize> {
    if packet.source == PacketSource::Chart {
        return None;
    }
    let wanted = packet.text.trim();
    if wanted.is_empty() {
        return None;
    }
    let doc = session.document();
    let exact = doc.leaves().find(|l| l.text.trim() == wanted);
    let partial = || {
        doc.leaves()
            .find(|l| l.text.trim().len() >= 3 && wanted.contains(l.text.trim()))
    };
    exact
        .or_else(partial)
        .and_then(|leaf| doc.paragraph_index_of_leaf(&leaf.id))
}

/// Applies a drop to the session. Nothing is written until every fallible
/// step (packet validation, generation, chart rules) has succeeded, so an
/// error leaves the session untouched.
pub fn route_drop(
    session: &mut Session,
    packet: &DragPacket,
    target: &DropTarget,
    provider: &dyn Provider,
    max_retries: u32,
) -> Result<DropOutcome, InteractionError> {
    packet.validate(session.dataset())?;
    match target {
        DropTarget::TellMeMore => {
            let levels = complement_levels(packet);
            let bundle = build_followup_prompt(session, packet, &levels);
            let validator = Validator::new(session.dataset())
                .with_known_charts(session.charts().iter().map(|c| c.id.clone()))
                .with_allowed_levels(&levels)
                .with_paragraph_count(1);
            let generation = llm::generate(&bundle, &validator, provider, max_retries)?;
            let turn = TranscriptTurn::from_generation(&bundle, &generation);
            let doc = session.document_mut();
            doc.append_paragraphs(generation.document);
            let numbering = renumber_chart_refs(doc);
            let paragraph = doc.paragraphs.last().cloned().expect("one paragraph was appended");
            session.transcript_mut().push(turn);
            Ok(DropOutcome {
                effect: DropEffect::NewParagraph(paragraph),
                chart_ref_paragraph: None,
                numbering,
                warnings: Vec::new(),
            })
        }
        DropTarget::ShowMeMore => {
            let id = session.next_chart_id();
            let outcome = chartspec::synthesize_chart(packet, session.dataset(), &id)?;
            let anchor = anchor_paragraph(session, packet);
            session.charts_mut().push(outcome.spec.clone());
            let doc = session.document_mut();
            let chart_ref_paragraph = doc.insert_chart_ref(anchor, &id);
            let numbering = renumber_chart_refs(doc);
            Ok(DropOutcome {
                effect: DropEffect::NewChart(outcome.spec),
                chart_ref_paragraph,
                numbering,
                warnings: outcome.warnings,
            })
        }
        DropTarget::Chart(chart_id) => {
            let index = session
                .charts()
                .iter()
                .position(|c| &c.id == chart_id)
                .ok_or_else(|| InteractionError::UnknownChart(chart_id.clone()))?;
            let outcome = chartspec::update_chart(&session.charts()[index], packet, session.dataset())?;
            session.charts_mut()[index] = outcome.spec.clone();
            let numbering = renumber_chart_refs(session.document_mut());
            Ok(DropOutcome {
                effect: DropEffect::UpdatedChart(outcome.spec),
                chart_ref_paragraph: None,
                numbering,
                warnings: outcome.warnings,
            })
        }
    }
}
