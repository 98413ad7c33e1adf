//! The level-tagged narrative tree.
//!
//! Shape is fixed at three levels: [`Paragraph`] → [`Sentence`] → item, where
//! an item is either a [`SentenceLeaf`] (a run of text plus its metadata) or a
//! [`ChartRefToken`] (an inline, numbered link to a chart).

mod grounding;
mod level;
mod refs;
mod validate;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;
use thiserror::Error;

pub use grounding::{ground_check, GroundingReport, Mismatch, DEFAULT_TOLERANCE};
pub use level::{color_for, LevelColor, SemanticLevel, LEVEL_COLORS};
pub use refs::{renumber_chart_refs, ChartNumbering};
pub use validate::{
    validate_tree, ValidationError, ValidationErrorKind, ValidationErrors, Validator,
};

use crate::dataset::StatisticKind;
use crate::interaction::{DragPacket, PacketSource, PacketValue};

/// A value literal as it appears in LLM output or a drag packet: either a
/// JSON number or a string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum Literal {
    Number(f64),
    Text(String),
}

impl Literal {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Number(v) => Some(*v).filter(|v| v.is_finite()),
            Literal::Text(s) => crate::dataset::parse_finite(s),
        }
    }

    /// Text form used to match against row keys (`98101.0` matches `"98101"`).
    pub fn as_key(&self) -> String {
        match self {
            Literal::Text(s) => s.trim().to_string(),
            Literal::Number(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", *v as i64),
            Literal::Number(v) => v.to_string(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(v) => write!(f, "{v}"),
            Literal::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Literal {
    fn from(v: f64) -> Self {
        Literal::Number(v)
    }
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Text(s.to_string())
    }
}

/// A value claimed by a leaf. `stat` names the statistic an L2 claim refers
/// to; when absent the mean is assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ValueClaim {
    pub field: String,
    pub value: Literal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stat: Option<StatisticKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SentenceLeaf {
    pub id: String,
    pub text: String,
    #[serde(rename = "layer")]
    pub level: SemanticLevel,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default)]
    pub values: Vec<ValueClaim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChartRefToken {
    pub chart_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_number: Option<u32>,
}

impl ChartRefToken {
    pub fn new(chart_id: impl Into<String>) -> Self {
        Self {
            chart_id: chart_id.into(),
            display_number: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SentenceItem {
    Leaf(SentenceLeaf),
    ChartRef(ChartRefToken),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Sentence {
    pub items: Vec<SentenceItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Paragraph {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Paragraph {
    pub fn leaves(&self) -> impl Iterator<Item = &SentenceLeaf> {
        self.sentences.iter().flat_map(|s| {
            s.items.iter().filter_map(|item| match item {
                SentenceItem::Leaf(leaf) => Some(leaf),
                SentenceItem::ChartRef(_) => None,
            })
        })
    }

    /// Plain text of the paragraph, with chart references rendered as `[n]`.
    pub fn plain_text(&self) -> String {
        let mut out = String::new();
        for sentence in &self.sentences {
            for item in &sentence.items {
                let piece = match item {
                    SentenceItem::Leaf(leaf) => leaf.text.clone(),
                    SentenceItem::ChartRef(r) => match r.display_number {
                        Some(n) => format!("[{n}]"),
                        None => format!("[{}]", r.chart_id),
                    },
                };
                if !out.is_empty() && !out.ends_with(' ') && !piece.starts_with([' ', '.', ',']) {
                    out.push(' ');
                }
                out.push_str(piece.trim_end());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NarrativeDocument {
    pub paragraphs: Vec<Paragraph>,
}

impl NarrativeDocument {
    pub fn leaves(&self) -> impl Iterator<Item = &SentenceLeaf> {
        self.paragraphs.iter().flat_map(Paragraph::leaves)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn leaf(&self, id: &str) -> Option<&SentenceLeaf> {
        self.leaves().find(|l| l.id == id)
    }

    /// Chart reference tokens in document order.
    pub fn chart_refs(&self) -> impl Iterator<Item = &ChartRefToken> {
        self.paragraphs
            .iter()
            .flat_map(|p| &p.sentences)
            .flat_map(|s| &s.items)
            .filter_map(|item| match item {
                SentenceItem::ChartRef(r) => Some(r),
                SentenceItem::Leaf(_) => None,
            })
    }

    pub fn paragraph_index_of_leaf(&self, leaf_id: &str) -> Option<usize> {
        self.paragraphs
            .iter()
            .position(|p| p.leaves().any(|l| l.id == leaf_id))
    }

    /// Appends generated paragraphs, re-identifying them so paragraph and
    /// leaf ids stay unique document-wide (`p3`, `p3.s1.l2`, ...). Returns
    /// the appended paragraphs as stored.
    pub fn append_paragraphs(&mut self, fragment: NarrativeDocument) -> Vec<Paragraph> {
        let start = self.paragraphs.len();
        for (offset, mut paragraph) in fragment.paragraphs.into_iter().enumerate() {
            let pid = format!("p{}", start + offset + 1);
            for (si, sentence) in paragraph.sentences.iter_mut().enumerate() {
                let mut leaf_no = 0;
                for item in &mut sentence.items {
                    if let SentenceItem::Leaf(leaf) = item {
                        leaf_no += 1;
                        leaf.id = format!("{pid}.s{}.l{leaf_no}", si + 1);
                    }
                }
            }
            paragraph.id = pid;
            self.paragraphs.push(paragraph);
        }
        self.paragraphs[start..].to_vec()
    }

    /// Appends a chart reference at the end of the last sentence of the given
    /// paragraph, or of the last paragraph when `paragraph` is `None`.
    /// Returns the id of the paragraph that received it.
    pub fn insert_chart_ref(&mut self, paragraph: Option<usize>, chart_id: &str) -> Option<String> {
        let idx = match paragraph {
            Some(i) if i < self.paragraphs.len() => i,
            Some(_) => return None,
            None => self.paragraphs.len().checked_sub(1)?,
        };
        let target = &mut self.paragraphs[idx];
        if target.sentences.is_empty() {
            target.sentences.push(Sentence::default());
        }
        let sentence = target.sentences.last_mut().expect("non-empty");
        sentence
            .items
            .push(SentenceItem::ChartRef(ChartRefToken::new(chart_id)));
        Some(target.id.clone())
    }

    /// Checks that the tree only has unique ids. Shape is guaranteed by the
    /// types; field-level checks live in [`Validator`].
    pub fn duplicate_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut dups = Vec::new();
        for id in self
            .paragraphs
            .iter()
            .map(|p| p.id.as_str())
            .chain(self.leaves().map(|l| l.id.as_str()))
        {
            if !seen.insert(id) {
                dups.push(id.to_string());
            }
        }
        dups
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("empty selection")]
    EmptySelection,
    #[error("unknown leaf {0:?}")]
    UnknownLeaf(String),
}

/// Builds a drag packet from selected leaves: union of fields and values,
/// the highest level among the leaves, and their text joined in document
/// order. Values on the key field are also exposed as packet keys.
pub fn packet_from_text(
    doc: &NarrativeDocument,
    leaf_ids: &[&str],
    key_field: &str,
) -> Result<DragPacket, SelectionError> {
    if leaf_ids.is_empty() {
        return Err(SelectionError::EmptySelection);
    }
    if let Some(missing) = leaf_ids.iter().find(|id| doc.leaf(id).is_none()) {
        return Err(SelectionError::UnknownLeaf(missing.to_string()));
    }
    let selected: Vec<&SentenceLeaf> = doc.leaves().filter(|l| leaf_ids.contains(&l.id.as_str())).collect();

    let mut fields: Vec<String> = Vec::new();
    let mut values: Vec<PacketValue> = Vec::new();
    let mut keys: Vec<String> = Vec::new();
    for leaf in &selected {
        for f in &leaf.fields {
            if !fields.contains(f) {
                fields.push(f.clone());
            }
        }
        for v in &leaf.values {
            let pv = PacketValue {
                field: v.field.clone(),
                value: v.value.clone(),
            };
            if !values.contains(&pv) {
                values.push(pv);
            }
            if v.field == key_field {
                let key = v.value.as_key();
                if !keys.contains(&key) {
                    keys.push(key);
                }
            }
        }
    }
    let level = selected
        .iter()
        .map(|l| l.level)
        .max()
        .expect("non-empty selection");
    let text = selected
        .iter()
        .map(|l| l.text.trim())
        .collect::<Vec<_>>()
        .join(" ");
    Ok(DragPacket {
        source: PacketSource::Text,
        fields,
        values,
        keys,
        level,
        text,
    })
}
