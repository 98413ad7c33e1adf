use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{Literal, NarrativeDocument, SemanticLevel};
use crate::dataset::{compute_statistic, Dataset, FieldKind, StatisticKind};

pub const DEFAULT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Mismatch {
    pub leaf_id: String,
    pub field: String,
    pub claimed: f64,
    pub actual: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GroundingReport {
    pub checked: usize,
    /// Numeric claims that could not be tied to a row or statistic.
    pub skipped: usize,
    pub mismatches: Vec<Mismatch>,
}

impl GroundingReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Relative error of `claimed` against `actual`; absolute error when the
/// true value is zero.
pub fn relative_error(claimed: f64, actual: f64) -> f64 {
    let diff = (claimed - actual).abs();
    if actual == 0.0 {
        diff
    } else {
        diff / actual.abs()
    }
}

/// Compares numeric claims of L1/L2 leaves with the data.
///
/// An L1 claim is checked against the row named by the leaf's single key
/// value; an L2 claim against the statistic in its `stat` tag (mean when
/// absent). Claims on L3/L4 leaves, and L1 claims without exactly one key,
/// are skipped.
pub fn ground_check(doc: &NarrativeDocument, dataset: &Dataset, tolerance: f64) -> GroundingReport {
    let key_field = dataset.key_field().name.as_str();
    let mut report = GroundingReport::default();
    for leaf in doc.leaves() {
        let mut keys: Vec<String> = leaf
            .values
            .iter()
            .filter(|v| v.field == key_field)
            .map(|v| v.value.as_key())
            .collect();
        keys.dedup();
        for claim in &leaf.values {
            let numeric = dataset
                .field(&claim.field)
                .is_some_and(|f| f.kind == FieldKind::Numeric);
            if !numeric {
                continue;
            }
            let actual = match leaf.level {
                SemanticLevel::L1 if keys.len() == 1 => {
                    dataset.value_at(&keys[0], &claim.field).ok().flatten()
                }
                SemanticLevel::L2 => compute_statistic(
                    dataset,
                    &claim.field,
                    claim.stat.unwrap_or(StatisticKind::Mean),
                )
                .ok(),
                _ => None,
            };
            let (Some(actual), Some(claimed)) = (actual, claim_value(&claim.value)) else {
                report.skipped += 1;
                continue;
            };
            report.checked += 1;
            let err = relative_error(claimed, actual);
            if err > tolerance {
                report.mismatches.push(Mismatch {
                    leaf_id: leaf.id.clone(),
                    field: claim.field.clone(),
                    claimed,
                    actual,
                    relative_error: err,
                });
            }
        }
    }
    report
}

fn claim_value(lit: &Literal) -> Option<f64> {
    lit.as_f64()
}
