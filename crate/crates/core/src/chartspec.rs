//! Rule-based chart synthesis from drag packets.
//!
//! One numeric field gives a bar chart over every key, two give a scatter
//! plot (first field on x). Values become reference lines on the matching
//! axis, and keys (or values of the key field) highlight marks. Dropping a
//! packet on an existing chart applies the same rules, upgrading a bar chart
//! to a scatter plot when a new field arrives. Specs hold no row data; they
//! render from the dataset alone.

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;
use thiserror::Error;

use crate::dataset::{Dataset, FieldKind};
use crate::interaction::DragPacket;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChartError {
    #[error("packet names no field to chart")]
    NoFields,
    #[error("field {0:?} is not numeric and cannot be charted")]
    NonNumericField(String),
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("value {value:?} is not a number for field {field:?}")]
    MalformedValue { field: String, value: String },
}

pub type Result<T> = std::result::Result<T, ChartError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Bar,
    Scatter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReferenceLine {
    pub field: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ChartSpec {
    pub id: String,
    pub kind: ChartKind,
    pub x_field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_field: Option<String>,
    #[serde(default)]
    pub reference_lines: Vec<ReferenceLine>,
    #[serde(default)]
    pub highlights: Vec<String>,
    pub title: String,
}

impl ChartSpec {
    /// Data fields shown on the chart (the key axis of a bar chart excluded).
    pub fn displayed_fields(&self) -> Vec<&str> {
        std::iter::once(self.x_field.as_str())
            .chain(self.y_field.as_deref())
            .collect()
    }

    pub fn displays(&self, field: &str) -> bool {
        self.x_field == field || self.y_field.as_deref() == Some(field)
    }
}

/// A synthesized or updated spec plus any non-fatal notes (ignored extra
/// fields, values for fields the chart does not show).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartOutcome {
    pub spec: ChartSpec,
    pub warnings: Vec<String>,
}

/// Numeric packet fields in packet order. The key field is implicit in
/// every chart and is skipped.
fn chartable_fields(packet: &DragPacket, dataset: &Dataset) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    for name in &packet.fields {
        let field = dataset
            .field(name)
            .ok_or_else(|| ChartError::UnknownField(name.clone()))?;
        match field.kind {
            FieldKind::Key => {}
            FieldKind::Categorical => return Err(ChartError::NonNumericField(name.clone())),
            FieldKind::Numeric => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        }
    }
    Ok(out)
}

fn add_highlight(spec: &mut ChartSpec, key: &str, dataset: &Dataset) -> Result<()> {
    if !dataset.has_key(key) {
        return Err(ChartError::UnknownKey(key.to_string()));
    }
    if !spec.highlights.iter().any(|h| h == key) {
        spec.highlights.push(key.to_string());
    }
    Ok(())
}

fn apply_marks(
    spec: &mut ChartSpec,
    packet: &DragPacket,
    dataset: &Dataset,
    warnings: &mut Vec<String>,
) -> Result<()> {
    for key in &packet.keys {
        add_highlight(spec, key, dataset)?;
    }
    let key_field = &dataset.key_field().name;
    for value in &packet.values {
        let field = dataset
            .field(&value.field)
            .ok_or_else(|| ChartError::UnknownField(value.field.clone()))?;
        if &field.name == key_field {
            add_highlight(spec, &value.value.as_key(), dataset)?;
            continue;
        }
        if !spec.displays(&field.name) {
            warnings.push(format!(
                "value {} for {} dropped: field is not on this chart",
                value.value, field.name
            ));
            continue;
        }
        let v = value.value.as_f64().ok_or_else(|| ChartError::MalformedValue {
            field: field.name.clone(),
            value: value.value.to_string(),
        })?;
        let line = ReferenceLine {
            field: field.name.clone(),
            value: v,
        };
        if !spec.reference_lines.contains(&line) {
            spec.reference_lines.push(line);
        }
    }
    Ok(())
}

pub fn synthesize_chart(packet: &DragPacket, dataset: &Dataset, id: &str) -> Result<ChartOutcome> {
    let fields = chartable_fields(packet, dataset)?;
    let mut warnings = Vec::new();
    let mut spec = match fields.as_slice() {
        [] => return Err(ChartError::NoFields),
        [x] => ChartSpec {
            id: id.to_string(),
            kind: ChartKind::Bar,
            x_field: x.clone(),
            y_field: None,
            reference_lines: Vec::new(),
            highlights: Vec::new(),
            title: String::new(),
        },
        [x, y, rest @ ..] => {
            if !rest.is_empty() {
                warnings.push(format!(
                    "only the first two fields are charted; ignored {}",
                    rest.join(", ")
                ));
            }
            ChartSpec {
                id: id.to_string(),
                kind: ChartKind::Scatter,
                x_field: x.clone(),
                y_field: Some(y.clone()),
                reference_lines: Vec::new(),
                highlights: Vec::new(),
                title: String::new(),
            }
        }
    };
    apply_marks(&mut spec, packet, dataset, &mut warnings)?;
    spec.title = chart_title(&spec, dataset);
    Ok(ChartOutcome { spec, warnings })
}

/// Applies a dropped packet to an existing chart. Never removes highlights
/// or reference lines and never turns a scatter plot back into a bar chart.
pub fn update_chart(spec: &ChartSpec, packet: &DragPacket, dataset: &Dataset) -> Result<ChartOutcome> {
    let mut next = spec.clone();
    let mut warnings = Vec::new();
    let new_fields: Vec<String> = chartable_fields(packet, dataset)?
        .into_iter()
        .filter(|f| !spec.displays(f))
        .collect();
    let mut ignored: &[String] = &new_fields;
    if next.kind == ChartKind::Bar {
        if let Some((first, rest)) = new_fields.split_first() {
            next.kind = ChartKind::Scatter;
            next.y_field = Some(first.clone());
            ignored = rest;
        }
    }
    if !ignored.is_empty() {
        warnings.push(format!(
            "chart already shows two fields; ignored {}",
            ignored.join(", ")
        ));
    }
    apply_marks(&mut next, packet, dataset, &mut warnings)?;
    next.title = chart_title(&next, dataset);
    Ok(ChartOutcome {
        spec: next,
        warnings,
    })
}

/// `snake_case` → `Title Case`.
pub fn title_case(name: &str) -> String {
    name.split('_')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect::<String>(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn display_name(dataset: &Dataset, field: &str) -> String {
    dataset
        .field(field)
        .and_then(|f| f.description.clone())
        .filter(|d| !d.trim().is_empty())
        .unwrap_or_else(|| title_case(field))
}

/// Bar: the field's display name. Scatter: `"<x> by <y>"`.
pub fn chart_title(spec: &ChartSpec, dataset: &Dataset) -> String {
    match (&spec.kind, &spec.y_field) {
        (ChartKind::Scatter, Some(y)) => format!(
            "{} by {}",
            display_name(dataset, &spec.x_field),
            display_name(dataset, y)
        ),
        _ => display_name(dataset, &spec.x_field),
    }
}

/// Invariant violations of a spec against its dataset; empty when valid.
pub fn check_chart(spec: &ChartSpec, dataset: &Dataset) -> Vec<String> {
    let mut problems = Vec::new();
    for f in spec.displayed_fields() {
        match dataset.field(f) {
            Some(d) if d.kind == FieldKind::Numeric => {}
            Some(_) => problems.push(format!("{}: field {f} is not numeric", spec.id)),
            None => problems.push(format!("{}: unknown field {f}", spec.id)),
        }
    }
    if (spec.kind == ChartKind::Scatter) != spec.y_field.is_some() {
        problems.push(format!("{}: y_field must be set exactly for scatter charts", spec.id));
    }
    for h in &spec.highlights {
        if !dataset.has_key(h) {
            problems.push(format!("{}: highlight {h} is not a key", spec.id));
        }
    }
    for line in &spec.reference_lines {
        if !spec.displays(&line.field) {
            problems.push(format!("{}: reference line on undisplayed field {}", spec.id, line.field));
        }
    }
    if spec.title != chart_title(spec, dataset) {
        problems.push(format!("{}: title {:?} does not follow the title rule", spec.id, spec.title));
    }
    problems
}
