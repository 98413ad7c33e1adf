//! Prompt assembly. Pure: the same session state and packet always give the
//! same bundle, so fixture digests are stable.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::provider::{ChatMessage, Role};
use crate::analysis::{self, bands};
use crate::dataset::{compute_statistic, describe_l1, Dataset, FieldKind, StatisticKind};
use crate::interaction::{DragPacket, PacketValue};
use crate::narrative::SemanticLevel;
use crate::service::Session;

/// Rows beyond this count are left out of the digest; the aggregate facts
/// still cover them.
const MAX_DIGEST_ROWS: usize = 200;

/// Follow-up constraint: what the dropped packet was about and which levels
/// the answer must use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub target_levels: Vec<SemanticLevel>,
    pub source_level: SemanticLevel,
    pub fields: Vec<String>,
    pub keys: Vec<String>,
    pub values: Vec<PacketValue>,
    pub text: String,
}

impl Directive {
    pub fn render(&self) -> String {
        let levels = self
            .target_levels
            .iter()
            .map(|l| format!("{l} ({})", l.role()))
            .collect::<Vec<_>>()
            .join(" and ");
        let mut out = String::new();
        out.push_str("Tell me more about the selection below. Write exactly one new paragraph.\n");
        out.push_str(&format!("Selected text: {:?}\n", self.text));
        out.push_str(&format!("Selection level: {}\n", self.source_level));
        if !self.fields.is_empty() {
            out.push_str(&format!("Fields: {}\n", self.fields.join(", ")));
        }
        if !self.keys.is_empty() {
            out.push_str(&format!("Keys: {}\n", self.keys.join(", ")));
        }
        if !self.values.is_empty() {
            let vals = self
                .values
                .iter()
                .map(|v| format!("{}={}", v.field, v.value))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!("Values: {vals}\n"));
        }
        out.push_str(&format!(
            "Every leaf of the new paragraph must use level {levels}; use no other level.\n"
        ));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub dataset_digest: String,
    pub dataset_description: String,
    pub goal: String,
    pub format_instructions: String,
    pub history: Vec<ChatMessage>,
    pub directive: Option<Directive>,
}

const INITIAL_TASK: &str = "Write the opening narrative: two or three paragraphs that introduce the \
dataset through the lens of the analytical goal, mixing levels so that concrete values, statistics, \
relationships and domain insight all appear.";

impl PromptBundle {
    /// Text the fixture digest is computed from: the directive for
    /// follow-ups, the description and goal for the opening narrative.
    pub fn request_summary(&self) -> String {
        match &self.directive {
            Some(d) => d.render(),
            None => format!(
                "initial narrative\ndataset: {}\ngoal: {}\n",
                self.dataset_description, self.goal
            ),
        }
    }

    /// Stable hex digest used to key mock fixtures.
    pub fn fixture_key(&self) -> String {
        let digest = Sha256::digest(self.request_summary().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut messages = vec![ChatMessage::new(Role::System, self.format_instructions.clone())];
        let context = format!(
            "Dataset description: {}\n\nAnalytical goal: {}\n\n{}",
            self.dataset_description, self.goal, self.dataset_digest
        );
        messages.push(ChatMessage::new(Role::User, context));
        messages.extend(self.history.iter().cloned());
        let task = match &self.directive {
            Some(d) => d.render(),
            None => INITIAL_TASK.to_string(),
        };
        messages.push(ChatMessage::new(Role::User, task));
        messages
    }
}

/// Output contract plus the level definitions, sent as the system message.
pub fn format_instructions() -> String {
    let mut out = String::from(
        "You are a data analyst writing a narrative about a tabular dataset for a reader with a \
specific goal. Reply with a single JSON object and nothing else.\n\n\
JSON format:\n\
{\"paragraphs\": [{\"id\": \"p1\", \"sentences\": [{\"items\": [\n\
  {\"kind\": \"leaf\", \"id\": \"p1.s1.l1\", \"text\": \"...\", \"layer\": 1, \"fields\": [\"field_name\"],\n\
   \"values\": [{\"field\": \"field_name\", \"value\": 123, \"stat\": \"mean\"}]}\n\
]}]}]}\n\n\
A paragraph holds sentences, a sentence holds items, and an item is a leaf: a short run of text \
with its metadata. Split sentences into leaves so that each leaf has a single level. \
\"fields\" lists dataset fields the leaf talks about, using only the field names given. \
\"values\" lists specific values the leaf states; each value names its field. For a level 2 leaf \
give \"stat\" as one of mean, stdev, min, max, median or count. Row keys are values of the key \
field. Do not nest items or sentences any deeper.\n\n\
Semantic levels (\"layer\"):\n",
    );
    for level in SemanticLevel::ALL {
        out.push_str(&format!(
            "- {}: {}. Examples: {}.\n",
            level.number(),
            level.role(),
            level.example()
        ));
    }
    out
}

/// Schema, base data, statistics and relationship facts as compact text.
pub fn dataset_digest(dataset: &Dataset) -> String {
    let mut out = format!("Dataset: {}\nFields:\n", dataset.name());
    for f in dataset.schema() {
        let kind = match f.kind {
            FieldKind::Numeric => "numeric",
            FieldKind::Categorical => "categorical",
            FieldKind::Key => "key",
        };
        out.push_str(&format!("- {} ({kind}", f.name));
        if let Some(unit) = &f.unit {
            out.push_str(&format!(", {unit}"));
        }
        out.push(')');
        if let Some(d) = &f.description {
            out.push_str(&format!(": {d}"));
        }
        out.push('\n');
    }

    out.push_str("Base data (L1):\n");
    for fact in describe_l1(dataset) {
        out.push_str(&format!("- {}\n", fact.label()));
    }

    out.push_str("Statistics (L2):\n");
    let numeric: Vec<&str> = dataset
        .schema()
        .iter()
        .filter(|f| f.kind == FieldKind::Numeric)
        .map(|f| f.name.as_str())
        .collect();
    for name in &numeric {
        let stats = [
            StatisticKind::Mean,
            StatisticKind::Stdev,
            StatisticKind::Min,
            StatisticKind::Max,
            StatisticKind::Median,
        ]
        .iter()
        .filter_map(|s| {
            compute_statistic(dataset, name, *s)
                .ok()
                .map(|v| format!("{s}={}", round_for_prompt(v)))
        })
        .collect::<Vec<_>>()
        .join(", ");
        out.push_str(&format!("- {name}: {stats}\n"));
    }

    out.push_str("Relationships (L3):\n");
    for fact in analysis::all_correlations(dataset) {
        out.push_str(&format!("- {}\n", fact.label));
    }
    for name in &numeric {
        if let Ok(outliers) = analysis::detect_outliers(dataset, name, bands::DEFAULT_Z_THRESHOLD) {
            for fact in outliers {
                out.push_str(&format!("- {}\n", fact.label));
            }
        }
    }

    if dataset.row_count() <= MAX_DIGEST_ROWS {
        out.push_str("Rows:\n");
        let key_field = &dataset.key_field().name;
        for row in dataset.rows() {
            let cells = dataset
                .schema()
                .iter()
                .zip(row.cells())
                .filter(|(f, _)| &f.name != key_field)
                .map(|(f, c)| format!("{}={c}", f.name))
                .collect::<Vec<_>>()
                .join(", ");
            out.push_str(&format!("- {}: {cells}\n", row.key()));
        }
    }
    out
}

fn round_for_prompt(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn history(session: &Session) -> Vec<ChatMessage> {
    session
        .transcript()
        .iter()
        .flat_map(|turn| {
            [
                ChatMessage::new(Role::User, turn.request.clone()),
                ChatMessage::new(Role::Assistant, turn.response.clone()),
            ]
        })
        .collect()
}

fn base_bundle(session: &Session) -> PromptBundle {
    PromptBundle {
        dataset_digest: dataset_digest(session.dataset()),
        dataset_description: session.dataset().nl_description().to_string(),
        goal: session.goal().to_string(),
        format_instructions: format_instructions(),
        history: history(session),
        directive: None,
    }
}

pub fn build_init_prompt(session: &Session) -> PromptBundle {
    base_bundle(session)
}

pub fn build_followup_prompt(
    session: &Session,
    packet: &DragPacket,
    target_levels: &[SemanticLevel],
) -> PromptBundle {
    PromptBundle {
        directive: Some(Directive {
            target_levels: target_levels.to_vec(),
            source_level: packet.level,
            fields: packet.fields.clone(),
            keys: packet.keys.clone(),
            values: packet.values.clone(),
            text: packet.text.clone(),
        }),
        ..base_bundle(session)
    }
}
