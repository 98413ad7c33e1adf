//! Tabular datasets: the base-data (L1) and statistics (L2) layers.
//!
//! A [`Dataset`] is immutable once built. Every row has a cell for every
//! schema field, key values are unique, numeric cells are finite `f64`s and
//! categorical cells are non-empty strings. Keys are kept as strings so zip
//! codes such as `"02134"` keep their leading zeros.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use schemars::JsonSchema;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {reason}")]
    FileUnreadable { path: PathBuf, reason: String },
    #[error("malformed CSV: {0}")]
    MalformedCsv(String),
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("duplicate key value {0:?}")]
    DuplicateKey(String),
    #[error("row {0} does not have one cell per header column")]
    RaggedRow(usize),
    #[error("field {field:?}, row {row}: not a finite number")]
    UnparseableNumeric { field: String, row: usize },
    #[error("field {field:?}, row {row}: missing value")]
    MissingCell { field: String, row: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("field {0:?} is not numeric")]
    NonNumericField(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Numeric,
    Categorical,
    Key,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FieldDescriptor {
    pub name: String,
    pub kind: FieldKind,
    #[serde(default)]
    pub unit: Option<String>,
    /// Human-readable name, used for chart titles ("Average House Price").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl FieldDescriptor {
    pub fn new(name: impl Into<String>, kind: FieldKind) -> Self {
        Self {
            name: name.into(),
            kind,
            unit: None,
            description: None,
        }
    }
}

/// A single table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    key: String,
    cells: Vec<Cell>,
}

impl Row {
    pub fn key(&self) -> &str {
        &self.key
    }

    /// Cells in schema order. The key field's slot holds the key as text.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    nl_description: String,
    schema: Vec<FieldDescriptor>,
    rows: Vec<Row>,
    key_index: usize,
}

impl Dataset {
    /// Builds a dataset from schema-ordered cells, checking every invariant.
    pub fn new(
        name: impl Into<String>,
        nl_description: impl Into<String>,
        schema: Vec<FieldDescriptor>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self> {
        let key_index = check_schema(&schema)?;
        if rows.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(rows.len());
        let mut out = Vec::with_capacity(rows.len());
        for (i, cells) in rows.into_iter().enumerate() {
            let row_no = i + 1;
            if cells.len() != schema.len() {
                return Err(DatasetError::RaggedRow(row_no));
            }
            for (field, cell) in schema.iter().zip(&cells) {
                match (field.kind, cell) {
                    (FieldKind::Numeric, Cell::Number(v)) if v.is_finite() => {}
                    (FieldKind::Numeric, _) => {
                        return Err(DatasetError::UnparseableNumeric {
                            field: field.name.clone(),
                            row: row_no,
                        })
                    }
                    (_, Cell::Text(s)) if !s.trim().is_empty() => {}
                    (_, Cell::Text(_)) => {
                        return Err(DatasetError::MissingCell {
                            field: field.name.clone(),
                            row: row_no,
                        })
                    }
                    (_, Cell::Number(_)) => {
                        return Err(DatasetError::InvalidSchema(format!(
                            "row {row_no}: field {:?} expects text, got a number",
                            field.name
                        )))
                    }
                }
            }
            let key = match &cells[key_index] {
                Cell::Text(k) => k.clone(),
                Cell::Number(_) => unreachable!("checked above"),
            };
            if !seen.insert(key.clone()) {
                return Err(DatasetError::DuplicateKey(key));
            }
            out.push(Row { key, cells });
        }
        Ok(Self {
            name: name.into(),
            nl_description: nl_description.into(),
            schema,
            rows: out,
            key_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nl_description(&self) -> &str {
        &self.nl_description
    }

    pub fn schema(&self) -> &[FieldDescriptor] {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn key_field(&self) -> &FieldDescriptor {
        &self.schema[self.key_index]
    }

    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.schema.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| DatasetError::UnknownField(name.to_string()))
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.rows.iter().any(|r| r.key == key)
    }

    pub fn row_by_key(&self, key: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.key.as_str())
    }

    /// Values of a numeric field in row order.
    pub fn numeric_column(&self, field: &str) -> Result<Vec<f64>> {
        let idx = self.field_index(field)?;
        if self.schema[idx].kind != FieldKind::Numeric {
            return Err(DatasetError::NonNumericField(field.to_string()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.cells[idx].as_f64().expect("numeric invariant"))
            .collect())
    }

    /// Numeric value of `field` in the row identified by `key`.
    pub fn value_at(&self, key: &str, field: &str) -> Result<Option<f64>> {
        let idx = self.field_index(field)?;
        if self.schema[idx].kind != FieldKind::Numeric {
            return Err(DatasetError::NonNumericField(field.to_string()));
        }
        Ok(self.row_by_key(key).and_then(|r| r.cells[idx].as_f64()))
    }

    /// Whether `literal` is a valid value for `field` (numeric fields need a finite
    /// number; other kinds any non-empty string).
    pub fn literal_fits(&self, field: &FieldDescriptor, literal: &str) -> bool {
        match field.kind {
            FieldKind::Numeric => parse_finite(literal).is_some(),
            FieldKind::Categorical | FieldKind::Key => !literal.trim().is_empty(),
        }
    }
}

fn check_schema(schema: &[FieldDescriptor]) -> Result<usize> {
    let mut names = HashSet::new();
    let mut key_index = None;
    for (i, field) in schema.iter().enumerate() {
        if field.name.trim().is_empty() {
            return Err(DatasetError::InvalidSchema(format!(
                "field {} has an empty name",
                i + 1
            )));
        }
        if !names.insert(field.name.as_str()) {
            return Err(DatasetError::InvalidSchema(format!(
                "duplicate field name {:?}",
                field.name
            )));
        }
        if field.kind == FieldKind::Key {
            if key_index.is_some() {
                return Err(DatasetError::InvalidSchema(
                    "more than one key field".to_string(),
                ));
            }
            key_index = Some(i);
        } else if field.name == "key" {
            // "key" is reserved for the row identifier in the JSON row encoding.
            return Err(DatasetError::InvalidSchema(
                "non-key field may not be named \"key\"".to_string(),
            ));
        }
    }
    key_index.ok_or_else(|| DatasetError::InvalidSchema("no key field".to_string()))
}

pub(crate) fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Per-field metadata supplied at load time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FieldMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Forces a kind instead of inferring it from the column contents.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FieldKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub key_column: String,
    pub fields: IndexMap<String, FieldMeta>,
}

impl LoadOptions {
    pub fn keyed_on(key_column: impl Into<String>) -> Self {
        Self {
            key_column: key_column.into(),
            fields: IndexMap::new(),
        }
    }
}

/// Reads a CSV file with a header row. The key column is named explicitly;
/// a column that parses fully as finite numbers is numeric, anything else is
/// categorical.
pub fn load_dataset(
    path: impl AsRef<Path>,
    name: &str,
    nl_description: &str,
    options: &LoadOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::FileUnreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_csv(&text, name, nl_description, options)
}

pub fn parse_csv(
    text: &str,
    name: &str,
    nl_description: &str,
    options: &LoadOptions,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DatasetError::MalformedCsv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DatasetError::MalformedCsv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(DatasetError::RaggedRow(i + 1));
        }
        raw.push(record.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if raw.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    if !headers.contains(&options.key_column) {
        return Err(DatasetError::InvalidSchema(format!(
            "key column {:?} not in header",
            options.key_column
        )));
    }
    if let Some(unknown) = options.fields.keys().find(|k| !headers.contains(k)) {
        return Err(DatasetError::UnknownField(unknown.clone()));
    }

    for (i, row) in raw.iter().enumerate() {
        for (h, cell) in headers.iter().zip(row) {
            if cell.trim().is_empty() {
                return Err(DatasetError::MissingCell {
                    field: h.clone(),
                    row: i + 1,
                });
            }
        }
    }

    let mut schema = Vec::with_capacity(headers.len());
    for (col, header) in headers.iter().enumerate() {
        let meta = options.fields.get(header).cloned().unwrap_or_default();
        let kind = if *header == options.key_column {
            FieldKind::Key
        } else if let Some(kind) = meta.kind {
            if kind == FieldKind::Key {
                return Err(DatasetError::InvalidSchema(format!(
                    "{header:?} declared as key but the key column is {:?}",
                    options.key_column
                )));
            }
            kind
        } else if raw.iter().all(|r| parse_finite(&r[col]).is_some()) {
            FieldKind::Numeric
        } else {
            FieldKind::Categorical
        };
        schema.push(FieldDescriptor {
            name: header.clone(),
            kind,
            unit: meta.unit,
            description: meta.description,
        });
    }

    let mut rows = Vec::with_capacity(raw.len());
    for (i, row) in raw.into_iter().enumerate() {
        let mut cells = Vec::with_capacity(row.len());
        for (field, cell) in schema.iter().zip(row) {
            cells.push(match field.kind {
                FieldKind::Numeric => Cell::Number(parse_finite(&cell).ok_or_else(|| {
                    DatasetError::UnparseableNumeric {
                        field: field.name.clone(),
                        row: i + 1,
                    }
                })?),
                FieldKind::Key => Cell::Text(cell.trim().to_string()),
                FieldKind::Categorical => Cell::Text(cell),
            });
        }
        rows.push(cells);
    }
    Dataset::new(name, nl_description, schema, rows)
}

/// A CSV file plus the metadata needed to load it. Relative paths resolve
/// against the directory of the file that referenced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetSource {
    pub path: PathBuf,
    pub name: String,
    pub description: String,
    pub key_column: String,
    #[serde(default)]
    pub fields: IndexMap<String, FieldMeta>,
}

impl DatasetSource {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::FileUnreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut source: DatasetSource = serde_json::from_str(&text)
            .map_err(|e| DatasetError::InvalidSchema(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            source.path = dir.join(&source.path);
        }
        Ok(source)
    }

    pub fn load(&self, base_dir: Option<&Path>) -> Result<Dataset> {
        let path = match base_dir {
            Some(dir) if self.path.is_relative() => dir.join(&self.path),
            _ => self.path.clone(),
        };
        let options = LoadOptions {
            key_column: self.key_column.clone(),
            fields: self.fields.clone(),
        };
        load_dataset(path, &self.name, &self.description, &options)
    }
}

#[derive(Serialize, Deserialize, JsonSchema)]
struct DatasetRepr {
    name: String,
    nl_description: String,
    schema: Vec<FieldDescriptor>,
    rows: Vec<Map<String, Value>>,
}

impl JsonSchema for Dataset {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Dataset".into()
    }

    fn json_schema(generator: &mut schemars::SchemaGenerator) -> schemars::Schema {
        DatasetRepr::json_schema(generator)
    }
}

impl Serialize for Dataset {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut map = Map::new();
                map.insert("key".to_string(), Value::String(row.key.clone()));
                for (i, (field, cell)) in self.schema.iter().zip(&row.cells).enumerate() {
                    if i == self.key_index {
                        continue;
                    }
                    let value = match cell {
                        Cell::Number(v) => serde_json::Number::from_f64(*v)
                            .map(Value::Number)
                            .unwrap_or(Value::Null),
                        Cell::Text(s) => Value::String(s.clone()),
                    };
                    map.insert(field.name.clone(), value);
                }
                map
            })
            .collect();
        DatasetRepr {
            name: self.name.clone(),
            nl_description: self.nl_description.clone(),
            schema: self.schema.clone(),
            rows,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = DatasetRepr::deserialize(deserializer)?;
        let key_index = check_schema(&repr.schema).map_err(D::Error::custom)?;
        let mut rows = Vec::with_capacity(repr.rows.len());
        for (i, map) in repr.rows.iter().enumerate() {
            let row_no = i + 1;
            let mut cells = Vec::with_capacity(repr.schema.len());
            for (idx, field) in repr.schema.iter().enumerate() {
                let lookup = if idx == key_index { "key" } else { field.name.as_str() };
                let value = map
                    .get(lookup)
                    .ok_or_else(|| D::Error::custom(DatasetError::RaggedRow(row_no)))?;
                let cell = match (field.kind, value) {
                    (FieldKind::Numeric, Value::Number(n)) => Cell::Number(n.as_f64().unwrap_or(f64::NAN)),
                    (FieldKind::Numeric, _) => {
                        return Err(D::Error::custom(DatasetError::UnparseableNumeric {
                            field: field.name.clone(),
                            row: row_no,
                        }))
                    }
                    (_, Value::String(s)) => Cell::Text(s.clone()),
                    (_, Value::Number(n)) => Cell::Text(n.to_string()),
                    _ => {
                        return Err(D::Error::custom(DatasetError::MissingCell {
                            field: field.name.clone(),
                            row: row_no,
                        }))
                    }
                };
                cells.push(cell);
            }
            if map.len() != repr.schema.len() {
                return Err(D::Error::custom(DatasetError::RaggedRow(row_no)));
            }
            rows.push(cells);
        }
        Dataset::new(repr.name, repr.nl_description, repr.schema, rows).map_err(D::Error::custom)
    }
}

/// Statistics of the L2 layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    Mean,
    Stdev,
    Min,
    Max,
    Median,
    Count,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 6] = [
        StatisticKind::Mean,
        StatisticKind::Stdev,
        StatisticKind::Min,
        StatisticKind::Max,
        StatisticKind::Median,
        StatisticKind::Count,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::Mean => "mean",
            StatisticKind::Stdev => "stdev",
            StatisticKind::Min => "min",
            StatisticKind::Max => "max",
            StatisticKind::Median => "median",
            StatisticKind::Count => "count",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StatisticKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown statistic {s:?}"))
    }
}

/// Running mean and second central moment (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Self {
        let mut m = Moments::default();
        for &v in values {
            m.push(v);
        }
        m
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    /// Population variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }
}

/// Exact value of `stat` over all rows of `field`.
///
/// `stdev` is the population standard deviation (divide by n), so a single
/// row has a standard deviation of zero. `count` accepts any field.
pub fn compute_statistic(dataset: &Dataset, field: &str, stat: StatisticKind) -> Result<f64> {
    if stat == StatisticKind::Count {
        dataset.field_index(field)?;
        return Ok(dataset.row_count() as f64);
    }
    let values = dataset.numeric_column(field)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(match stat {
        StatisticKind::Min => min,
        StatisticKind::Max => max,
        StatisticKind::Mean => Moments::of(&values).mean.clamp(min, max),
        StatisticKind::Stdev => Moments::of(&values).variance().sqrt(),
        StatisticKind::Median => {
            let mut sorted = values;
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                sorted[mid - 1] + (sorted[mid] - sorted[mid - 1]) / 2.0
            }
        }
        StatisticKind::Count => unreachable!(),
    })
}

/// One base-data fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum L1Fact {
    Numeric { field: String, min: f64, max: f64 },
    Categorical { field: String, distinct: usize },
    Key { field: String, distinct: usize },
    RowCount { rows: usize },
}

impl L1Fact {
    pub fn label(&self) -> String {
        match self {
            L1Fact::Numeric { field, min, max } => {
                format!("{field}: numeric, range {min}\u{2013}{max}")
            }
            L1Fact::Categorical { field, distinct } => {
                format!("{field}: categorical, {distinct} distinct values")
            }
            L1Fact::Key { field, distinct } => format!("{field}: key, {distinct} rows"),
            L1Fact::RowCount { rows } => format!("{rows} rows"),
        }
    }
}

/// One fact per field, followed by a row-count fact.
pub fn describe_l1(dataset: &Dataset) -> Vec<L1Fact> {
    let mut facts: Vec<L1Fact> = dataset
        .schema()
        .iter()
        .enumerate()
        .map(|(idx, field)| match field.kind {
            FieldKind::Numeric => {
                let (min, max) = dataset.rows().iter().fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), row| {
                        let v = row.cells[idx].as_f64().expect("numeric invariant");
                        (lo.min(v), hi.max(v))
                    },
                );
                L1Fact::Numeric {
                    field: field.name.clone(),
                    min,
                    max,
                }
            }
            FieldKind::Categorical | FieldKind::Key => {
                let distinct = dataset
                    .rows()
                    .iter()
                    .map(|r| r.cells[idx].to_string())
                    .collect::<HashSet<_>>()
                    .len();
                if field.kind == FieldKind::Key {
                    L1Fact::Key {
                        field: field.name.clone(),
                        distinct,
                    }
                } else {
                    L1Fact::Categorical {
                        field: field.name.clone(),
                        distinct,
                    }
                }
            }
        })
        .collect();
    facts.push(L1Fact::RowCount {
        rows: dataset.row_count(),
    });
    facts
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn opts() -> LoadOptions {
        LoadOptions::keyed_on("zip")
    }

    #[test]
    fn seattle_fixture_schema() {
        let ds = seattle();
        assert_eq!(ds.row_count(), 24);
        assert_eq!(ds.key_field().name, "zip_code");
        let numeric = ds
            .schema()
            .iter()
            .filter(|f| f.kind == FieldKind::Numeric)
            .count();
        assert_eq!(numeric, 5);
        assert_eq!(
            ds.field("avg_price").unwrap().description.as_deref(),
            Some("Average House Price")
        );
    }

    #[test]
    fn header_only_is_empty() {
        let err = parse_csv("zip,price\n", "x", "", &opts()).unwrap_err();
        assert_eq!(err, DatasetError::EmptyDataset);
    }

    #[test]
    fn duplicate_key_rejected() {
        let csv = "zip,price\n98101,1\n98102,2\n98101,3\n";
        let err = parse_csv(csv, "x", "", &opts()).unwrap_err();
        assert_eq!(err, DatasetError::DuplicateKey("98101".into()));
    }

    #[test]
    fn ragged_row_rejected() {
        let csv = "zip,price\n98101,1\n98102\n";
        assert_eq!(
            parse_csv(csv, "x", "", &opts()).unwrap_err(),
            DatasetError::RaggedRow(2)
        );
    }

    #[test]
    fn missing_cell_is_an_error() {
        let csv = "zip,price\n98101,1\n98102,\n";
        assert_eq!(
            parse_csv(csv, "x", "", &opts()).unwrap_err(),
            DatasetError::MissingCell {
                field: "price".into(),
                row: 2
            }
        );
    }

    #[test]
    fn forced_numeric_reports_unparseable_cell() {
        let mut o = opts();
        o.fields.insert(
            "price".into(),
            FieldMeta {
                kind: Some(FieldKind::Numeric),
                ..Default::default()
            },
        );
        let csv = "zip,price\n98101,1\n98102,lots\n";
        assert_eq!(
            parse_csv(csv, "x", "", &o).unwrap_err(),
            DatasetError::UnparseableNumeric {
                field: "price".into(),
                row: 2
            }
        );
    }

    #[test]
    fn inference_and_leading_zero_keys() {
        let csv = "zip,price,hood\n02134,1.5,\"Allston, MA\"\n02135,2,Brighton\n";
        let ds = parse_csv(csv, "x", "", &opts()).unwrap();
        assert_eq!(ds.field("price").unwrap().kind, FieldKind::Numeric);
        assert_eq!(ds.field("hood").unwrap().kind, FieldKind::Categorical);
        assert!(ds.has_key("02134"));
        assert_eq!(ds.rows()[0].cells()[2], Cell::Text("Allston, MA".into()));
    }

    #[test]
    fn unknown_key_column() {
        let err = parse_csv("a,b\n1,2\n", "x", "", &opts()).unwrap_err();
        assert!(matches!(err, DatasetError::InvalidSchema(_)));
    }

    #[test]
    fn unreadable_file() {
        let err = load_dataset("/nonexistent/file.csv", "x", "", &opts()).unwrap_err();
        assert!(matches!(err, DatasetError::FileUnreadable { .. }));
    }

    #[test]
    fn basic_statistics() {
        let ds = numeric_table(&[("a", &[1.0, 2.0, 3.0]), ("c", &[5.0, 5.0, 5.0])]);
        assert_eq!(compute_statistic(&ds, "a", StatisticKind::Mean).unwrap(), 2.0);
        assert_eq!(compute_statistic(&ds, "c", StatisticKind::Stdev).unwrap(), 0.0);
        assert_eq!(compute_statistic(&ds, "a", StatisticKind::Median).unwrap(), 2.0);
        assert_eq!(compute_statistic(&ds, "id", StatisticKind::Count).unwrap(), 3.0);
        let pop = (2.0f64 / 3.0).sqrt();
        assert!((compute_statistic(&ds, "a", StatisticKind::Stdev).unwrap() - pop).abs() < 1e-15);
    }

    #[test]
    fn statistic_errors() {
        let ds = numeric_table(&[("a", &[1.0, 2.0])]);
        assert_eq!(
            compute_statistic(&ds, "zzz", StatisticKind::Mean),
            Err(DatasetError::UnknownField("zzz".into()))
        );
        assert_eq!(
            compute_statistic(&ds, "id", StatisticKind::Mean),
            Err(DatasetError::NonNumericField("id".into()))
        );
    }

    #[test]
    fn single_row_stdev_is_zero_and_ranges_collapse() {
        let ds = numeric_table(&[("a", &[7.5])]);
        assert_eq!(compute_statistic(&ds, "a", StatisticKind::Stdev).unwrap(), 0.0);
        for fact in describe_l1(&ds) {
            if let L1Fact::Numeric { min, max, .. } = fact {
                assert_eq!(min, max);
            }
        }
    }

    #[test]
    fn describe_fixture() {
        let ds = seattle();
        let facts = describe_l1(&ds);
        assert_eq!(facts.len(), ds.schema().len() + 1);
        assert_eq!(facts.last(), Some(&L1Fact::RowCount { rows: 24 }));
        let price = facts
            .iter()
            .find(|f| matches!(f, L1Fact::Numeric { field, .. } if field == "avg_price"))
            .unwrap();
        assert_eq!(price.label(), "avg_price: numeric, range 310000\u{2013}1250000");
    }

    #[test]
    fn json_round_trip() {
        let ds = seattle();
        let json = serde_json::to_string(&ds).unwrap();
        let back: Dataset = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ds);
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["rows"][0]["key"], "98101");
        assert_eq!(v["schema"][0]["kind"], "key");
    }

    #[test]
    fn json_rejects_duplicate_keys() {
        let json = r#"{"name":"x","nl_description":"","schema":[{"name":"id","kind":"key","unit":null}],
            "rows":[{"key":"a"},{"key":"a"}]}"#;
        assert!(serde_json::from_str::<Dataset>(json).is_err());
    }
}
