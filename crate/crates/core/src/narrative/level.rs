use std::borrow::Cow;
use std::fmt;

use schemars::{json_schema, JsonSchema, Schema, SchemaGenerator};
use serde::{Deserialize, Serialize};

/// Position of a text or chart fragment in the four-level hierarchy.
///
/// Serialized as the integer 1..=4 (the `layer` key on the wire).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SemanticLevel {
    L1 = 1,
    L2 = 2,
    L3 = 3,
    L4 = 4,
}

impl SemanticLevel {
    pub const ALL: [SemanticLevel; 4] = [
        SemanticLevel::L1,
        SemanticLevel::L2,
        SemanticLevel::L3,
        SemanticLevel::L4,
    ];

    pub fn role(self) -> &'static str {
        match self {
            SemanticLevel::L1 => "Base Data",
            SemanticLevel::L2 => "Statistics",
            SemanticLevel::L3 => "Relationships among data & statistics",
            SemanticLevel::L4 => "Insights and Integration of Domain Knowledge",
        }
    }

    /// Example content for the level, used in prompt instructions.
    pub fn example(self) -> &'static str {
        match self {
            SemanticLevel::L1 => "individual data values, rows and columns of the table",
            SemanticLevel::L2 => "summary statistics such as a mean, standard deviation, minimum or maximum",
            SemanticLevel::L3 => "correlations, clustering, outliers, and trends",
            SemanticLevel::L4 => "domain knowledge and insights that go beyond the data itself",
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    /// L1 and L2 describe data; L3 and L4 describe meaning.
    pub fn is_low(self) -> bool {
        self <= SemanticLevel::L2
    }

    pub fn color(self) -> LevelColor {
        color_for(self)
    }
}

impl TryFrom<u8> for SemanticLevel {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(SemanticLevel::L1),
            2 => Ok(SemanticLevel::L2),
            3 => Ok(SemanticLevel::L3),
            4 => Ok(SemanticLevel::L4),
            other => Err(format!("level out of range: {other}")),
        }
    }
}

impl From<SemanticLevel> for u8 {
    fn from(level: SemanticLevel) -> u8 {
        level as u8
    }
}

impl fmt::Display for SemanticLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LevelColor {
    pub name: &'static str,
    pub hex: &'static str,
}

pub const LEVEL_COLORS: [LevelColor; 4] = [
    LevelColor { name: "pink", hex: "#E91E8C" },
    LevelColor { name: "green", hex: "#1E9E50" },
    LevelColor { name: "yellow", hex: "#D9A400" },
    LevelColor { name: "blue", hex: "#1A4FD6" },
];

pub fn color_for(level: SemanticLevel) -> LevelColor {
    LEVEL_COLORS[level as usize - 1]
}

impl JsonSchema for SemanticLevel {
    fn schema_name() -> Cow<'static, str> {
        "SemanticLevel".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        json_schema!({
            "type": "integer",
            "minimum": 1,
            "maximum": 4,
            "description": "1 base data, 2 statistics, 3 relationships, 4 insights and domain knowledge"
        })
    }
}
