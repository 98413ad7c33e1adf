//! Engine for bimodal (text + chart) data exploration.
//!
//! A [`service::Session`] binds a tabular [`dataset::Dataset`] to an analytical
//! goal. An LLM provider produces a narrative tree whose leaves carry a
//! [`narrative::SemanticLevel`] together with the fields and values they talk
//! about. Fragments of that narrative, or marks and axes of a chart, become
//! [`interaction::DragPacket`]s that can be dropped on "tell me more" (new
//! text), "show me more" (new chart) or an existing chart (chart update).
//!
//! Layers of the hierarchy:
//!
//! | level | role                                          | computed by |
//! |-------|-----------------------------------------------|-------------|
//! | L1    | Base Data                                     | [`dataset`] |
//! | L2    | Statistics                                    | [`dataset`] |
//! | L3    | Relationships among data & statistics         | [`analysis`] |
//! | L4    | Insights and Integration of Domain Knowledge  | LLM only    |

pub mod analysis;
pub mod chartspec;
pub mod dataset;
pub mod interaction;
pub mod llm;
pub mod narrative;
pub mod schema;
pub mod service;

pub use analysis::{RelationKind, RelationshipFact};
pub use chartspec::{ChartKind, ChartSpec};
pub use dataset::{Dataset, FieldDescriptor, FieldKind, StatisticKind};
pub use interaction::{DragPacket, DropEffect, DropTarget, PacketSource};
pub use narrative::{NarrativeDocument, Paragraph, SemanticLevel, Sentence, SentenceLeaf};
pub use service::{Session, StateDelta};
