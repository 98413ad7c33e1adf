//! All-or-nothing validation of an untyped narrative tree against a dataset.
//!
//! Every violation is reported with a JSON path such as
//! `$.paragraphs[0].sentences[1].items[2].layer`; a tree with any violation
//! is rejected as a whole.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use super::{
    ChartRefToken, Literal, NarrativeDocument, Paragraph, SemanticLevel, Sentence, SentenceItem,
    SentenceLeaf, ValueClaim,
};
use crate::dataset::{Dataset, FieldKind, StatisticKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationErrorKind {
    NotJson,
    WrongType,
    MissingKey,
    WrongNesting,
    LevelOutOfRange,
    LevelNotAllowed,
    EmptyText,
    UnknownField,
    MalformedValue,
    UnknownItemKind,
    UnknownChart,
    DuplicateId,
    ParagraphCount,
}

impl ValidationErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationErrorKind::NotJson => "response is not a JSON object",
            ValidationErrorKind::WrongType => "wrong type",
            ValidationErrorKind::MissingKey => "missing key",
            ValidationErrorKind::WrongNesting => "wrong nesting depth",
            ValidationErrorKind::LevelOutOfRange => "level out of range",
            ValidationErrorKind::LevelNotAllowed => "level not allowed here",
            ValidationErrorKind::EmptyText => "empty text",
            ValidationErrorKind::UnknownField => "unknown field",
            ValidationErrorKind::MalformedValue => "malformed value literal",
            ValidationErrorKind::UnknownItemKind => "unknown item kind",
            ValidationErrorKind::UnknownChart => "unknown chart",
            ValidationErrorKind::DuplicateId => "duplicate id",
            ValidationErrorKind::ParagraphCount => "wrong number of paragraphs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationError {
    pub path: String,
    pub kind: ValidationErrorKind,
    pub detail: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.kind.as_str())?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl ValidationErrors {
    pub fn at(&self, path: &str) -> impl Iterator<Item = &ValidationError> {
        let path = path.to_string();
        self.0.iter().filter(move |e| e.path == path)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ValidationError> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// Validates with the dataset schema plus optional context: the chart ids a
/// `chart_ref` may point to, the levels leaves may use, and the number of
/// paragraphs expected.
#[derive(Debug, Clone)]
pub struct Validator<'a> {
    dataset: &'a Dataset,
    known_charts: Option<HashSet<String>>,
    allowed_levels: Option<Vec<SemanticLevel>>,
    paragraphs: (usize, usize),
}

/// Validates a raw tree against the dataset schema only.
pub fn validate_tree(raw: &Value, dataset: &Dataset) -> Result<NarrativeDocument, ValidationErrors> {
    Validator::new(dataset).validate(raw)
}

struct Walk<'v> {
    errors: Vec<ValidationError>,
    ids: HashSet<String>,
    v: &'v Validator<'v>,
}

impl Walk<'_> {
    fn err(&mut self, path: impl Into<String>, kind: ValidationErrorKind, detail: impl Into<String>) {
        self.errors.push(ValidationError {
            path: path.into(),
            kind,
            detail: detail.into(),
        });
    }

    fn object<'a>(&mut self, value: &'a Value, path: &str, what: &str) -> Option<&'a Map<String, Value>> {
        match value.as_object() {
            Some(o) => Some(o),
            None => {
                self.err(path, ValidationErrorKind::WrongType, format!("expected {what} object"));
                None
            }
        }
    }

    fn array<'a>(&mut self, obj: &'a Map<String, Value>, key: &str, path: &str) -> Option<&'a Vec<Value>> {
        match obj.get(key) {
            Some(Value::Array(a)) => Some(a),
            Some(_) => {
                self.err(format!("{path}.{key}"), ValidationErrorKind::WrongType, "expected array");
                None
            }
            None => {
                self.err(format!("{path}.{key}"), ValidationErrorKind::MissingKey, "");
                None
            }
        }
    }

    fn id(&mut self, obj: &Map<String, Value>, path: &str, fallback: String) -> String {
        let id = match obj.get("id") {
            None | Some(Value::Null) => fallback,
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => {
                self.err(format!("{path}.id"), ValidationErrorKind::WrongType, "expected non-empty string");
                fallback
            }
        };
        if !self.ids.insert(id.clone()) {
            self.err(format!("{path}.id"), ValidationErrorKind::DuplicateId, id.clone());
        }
        id
    }

    fn nesting(&mut self, obj: &Map<String, Value>, path: &str, forbidden: &[&str], level: &str) -> bool {
        if let Some(key) = forbidden.iter().find(|k| obj.contains_key(**k)) {
            self.err(
                path,
                ValidationErrorKind::WrongNesting,
                format!("{level} may not contain {key:?}"),
            );
            return false;
        }
        true
    }

    fn document(&mut self, raw: &Value) -> Option<NarrativeDocument> {
        let root = match raw.as_object() {
            Some(o) => o,
            None => {
                self.err("$", ValidationErrorKind::NotJson, "expected an object with \"paragraphs\"");
                return None;
            }
        };
        if !root.contains_key("paragraphs") && !self.nesting(root, "$", &["sentences", "items", "kind"], "document") {
            return None;
        }
        let paragraphs = self.array(root, "paragraphs", "$")?;
        let (lo, hi) = self.v.paragraphs;
        if paragraphs.len() < lo || paragraphs.len() > hi {
            let expected = if lo == hi {
                format!("expected {lo}")
            } else {
                format!("expected at least {lo}")
            };
            self.err(
                "$.paragraphs",
                ValidationErrorKind::ParagraphCount,
                format!("{expected}, got {}", paragraphs.len()),
            );
        }
        let mut out = Vec::with_capacity(paragraphs.len());
        for (pi, p) in paragraphs.iter().enumerate() {
            if let Some(p) = self.paragraph(p, pi) {
                out.push(p);
            }
        }
        Some(NarrativeDocument { paragraphs: out })
    }

    fn paragraph(&mut self, value: &Value, pi: usize) -> Option<Paragraph> {
        let path = format!("$.paragraphs[{pi}]");
        let obj = self.object(value, &path, "paragraph")?;
        if !obj.contains_key("sentences") && !self.nesting(obj, &path, &["items", "kind", "text"], "paragraph") {
            return None;
        }
        let id = self.id(obj, &path, format!("p{}", pi + 1));
        let sentences = self.array(obj, "sentences", &path)?;
        let mut out = Vec::with_capacity(sentences.len());
        for (si, s) in sentences.iter().enumerate() {
            if let Some(s) = self.sentence(s, &format!("{path}.sentences[{si}]"), &id, si) {
                out.push(s);
            }
        }
        Some(Paragraph { id, sentences: out })
    }

    fn sentence(&mut self, value: &Value, path: &str, pid: &str, si: usize) -> Option<Sentence> {
        let obj = self.object(value, path, "sentence")?;
        if !self.nesting(obj, path, &["sentences", "kind", "text", "paragraphs"], "sentence") {
            return None;
        }
        let items = self.array(obj, "items", path)?;
        let mut out = Vec::with_capacity(items.len());
        for (ii, item) in items.iter().enumerate() {
            let fallback = format!("{pid}.s{}.l{}", si + 1, ii + 1);
            if let Some(item) = self.item(item, &format!("{path}.items[{ii}]"), fallback) {
                out.push(item);
            }
        }
        Some(Sentence { items: out })
    }

    fn item(&mut self, value: &Value, path: &str, fallback_id: String) -> Option<SentenceItem> {
        let obj = self.object(value, path, "item")?;
        if !self.nesting(obj, path, &["items", "sentences", "children", "paragraphs"], "item") {
            return None;
        }
        match obj.get("kind") {
            Some(Value::String(k)) if k == "leaf" => self.leaf(obj, path, fallback_id).map(SentenceItem::Leaf),
            Some(Value::String(k)) if k == "chart_ref" => self.chart_ref(obj, path).map(SentenceItem::ChartRef),
            Some(other) => {
                self.err(format!("{path}.kind"), ValidationErrorKind::UnknownItemKind, other.to_string());
                None
            }
            None => {
                self.err(format!("{path}.kind"), ValidationErrorKind::MissingKey, "");
                None
            }
        }
    }

    fn chart_ref(&mut self, obj: &Map<String, Value>, path: &str) -> Option<ChartRefToken> {
        let id = match obj.get("chart_id") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(_) => {
                self.err(format!("{path}.chart_id"), ValidationErrorKind::WrongType, "expected non-empty string");
                return None;
            }
            None => {
                self.err(format!("{path}.chart_id"), ValidationErrorKind::MissingKey, "");
                return None;
            }
        };
        if let Some(known) = &self.v.known_charts {
            if !known.contains(&id) {
                self.err(format!("{path}.chart_id"), ValidationErrorKind::UnknownChart, id);
                return None;
            }
        }
        Some(ChartRefToken::new(id))
    }

    fn leaf(&mut self, obj: &Map<String, Value>, path: &str, fallback_id: String) -> Option<SentenceLeaf> {
        let before = self.errors.len();
        let id = self.id(obj, path, fallback_id);

        let text = match obj.get("text") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(Value::String(_)) => {
                self.err(format!("{path}.text"), ValidationErrorKind::EmptyText, "");
                String::new()
            }
            Some(_) => {
                self.err(format!("{path}.text"), ValidationErrorKind::WrongType, "expected string");
                String::new()
            }
            None => {
                self.err(format!("{path}.text"), ValidationErrorKind::MissingKey, "");
                String::new()
            }
        };

        let level_path = format!("{path}.layer");
        let level = match obj.get("layer") {
            Some(Value::Number(n)) => match n.as_u64().and_then(|v| u8::try_from(v).ok()) {
                Some(v) => match SemanticLevel::try_from(v) {
                    Ok(level) => Some(level),
                    Err(_) => {
                        self.err(&level_path, ValidationErrorKind::LevelOutOfRange, format!("{v} is not in 1..=4"));
                        None
                    }
                },
                None => {
                    self.err(&level_path, ValidationErrorKind::LevelOutOfRange, format!("{n} is not in 1..=4"));
                    None
                }
            },
            Some(_) => {
                self.err(&level_path, ValidationErrorKind::WrongType, "expected an integer 1..=4");
                None
            }
            None => {
                self.err(&level_path, ValidationErrorKind::MissingKey, "");
                None
            }
        };
        if let (Some(level), Some(allowed)) = (level, &self.v.allowed_levels) {
            if !allowed.contains(&level) {
                let list = allowed.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ");
                self.err(&level_path, ValidationErrorKind::LevelNotAllowed, format!("{level}; use one of {list}"));
            }
        }

        let mut fields = Vec::new();
        match obj.get("fields") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                for (fi, f) in items.iter().enumerate() {
                    let fpath = format!("{path}.fields[{fi}]");
                    match f {
                        Value::String(name) if self.v.dataset.field(name).is_some() => fields.push(name.clone()),
                        Value::String(name) => self.err(fpath, ValidationErrorKind::UnknownField, name.clone()),
                        _ => self.err(fpath, ValidationErrorKind::WrongType, "expected field name"),
                    }
                }
            }
            Some(_) => self.err(format!("{path}.fields"), ValidationErrorKind::WrongType, "expected array"),
        }

        let mut values = Vec::new();
        match obj.get("values") {
            None | Some(Value::Null) => {}
            Some(Value::Array(items)) => {
                for (vi, v) in items.iter().enumerate() {
                    if let Some(claim) = self.value_claim(v, &format!("{path}.values[{vi}]")) {
                        values.push(claim);
                    }
                }
            }
            Some(_) => self.err(format!("{path}.values"), ValidationErrorKind::WrongType, "expected array"),
        }

        if self.errors.len() > before {
            return None;
        }
        Some(SentenceLeaf {
            id,
            text,
            level: level?,
            fields,
            values,
        })
    }

    fn value_claim(&mut self, value: &Value, path: &str) -> Option<ValueClaim> {
        let obj = self.object(value, path, "value")?;
        let field = match obj.get("field") {
            Some(Value::String(name)) => match self.v.dataset.field(name) {
                Some(f) => f,
                None => {
                    self.err(format!("{path}.field"), ValidationErrorKind::UnknownField, name.clone());
                    return None;
                }
            },
            Some(_) => {
                self.err(format!("{path}.field"), ValidationErrorKind::WrongType, "expected field name");
                return None;
            }
            None => {
                self.err(format!("{path}.field"), ValidationErrorKind::MissingKey, "");
                return None;
            }
        };
        let literal = match obj.get("value") {
            Some(Value::Number(n)) => n.as_f64().map(Literal::Number),
            Some(Value::String(s)) => Some(Literal::Text(s.clone())),
            Some(_) => None,
            None => {
                self.err(format!("{path}.value"), ValidationErrorKind::MissingKey, "");
                return None;
            }
        };
        let literal = match literal {
            Some(lit) if self.v.dataset.literal_fits(field, &lit.to_string()) => lit,
            other => {
                let shown = other.map(|l| l.to_string()).unwrap_or_else(|| obj["value"].to_string());
                self.err(
                    format!("{path}.value"),
                    ValidationErrorKind::MalformedValue,
                    format!("{shown:?} is not a valid {:?} value for {}", field.kind, field.name),
                );
                return None;
            }
        };
        let stat = match obj.get("stat") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => match s.parse::<StatisticKind>() {
                Ok(stat) if stat == StatisticKind::Count || field.kind == FieldKind::Numeric => Some(stat),
                Ok(stat) => {
                    self.err(
                        format!("{path}.stat"),
                        ValidationErrorKind::MalformedValue,
                        format!("{stat} needs a numeric field, {} is not", field.name),
                    );
                    return None;
                }
                Err(e) => {
                    self.err(format!("{path}.stat"), ValidationErrorKind::MalformedValue, e);
                    return None;
                }
            },
            Some(_) => {
                self.err(format!("{path}.stat"), ValidationErrorKind::WrongType, "expected statistic name");
                return None;
            }
        };
        Some(ValueClaim {
            field: field.name.clone(),
            value: literal,
            stat,
        })
    }
}

impl<'a> Validator<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        Self {
            dataset,
            known_charts: None,
            allowed_levels: None,
            paragraphs: (1, usize::MAX),
        }
    }

    /// Restricts `chart_ref` items to these chart ids.
    pub fn with_known_charts<I, S>(mut self, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.known_charts = Some(ids.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_allowed_levels(mut self, levels: &[SemanticLevel]) -> Self {
        self.allowed_levels = Some(levels.to_vec());
        self
    }

    pub fn with_paragraph_count(mut self, exact: usize) -> Self {
        self.paragraphs = (exact, exact);
        self
    }

    pub fn validate(&self, raw: &Value) -> Result<NarrativeDocument, ValidationErrors> {
        let mut walk = Walk {
            errors: Vec::new(),
            ids: HashSet::new(),
            v: self,
        };
        let doc = walk.document(raw);
        match doc {
            Some(doc) if walk.errors.is_empty() => Ok(doc),
            _ => Err(ValidationErrors(walk.errors)),
        }
    }
}
