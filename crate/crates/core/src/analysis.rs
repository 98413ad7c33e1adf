//! Relationship facts (L3): correlations, outliers, trends and clusters.
//!
//! Used to seed prompts and to ground L3 claims. All functions are pure over
//! an immutable [`Dataset`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, FieldKind, Moments};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("field {0:?} has zero variance")]
    DegenerateVariance(String),
    #[error("need at least {needed} rows, dataset has {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Correlation,
    Outlier,
    Trend,
    Cluster,
}

/// `value` is Pearson r, a signed z-score, a slope or a cluster index
/// depending on `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipFact {
    pub kind: RelationKind,
    pub fields: Vec<String>,
    pub keys: Vec<String>,
    pub value: f64,
    pub label: String,
}

/// Label thresholds, kept in one place because labels end up in prompts.
pub mod bands {
    pub const STRONG_CORRELATION: f64 = 0.7;
    pub const MODERATE_CORRELATION: f64 = 0.4;
    /// Scale-free slope below which a trend is "flat".
    pub const FLAT_TREND: f64 = 0.05;
    pub const DEFAULT_Z_THRESHOLD: f64 = 2.0;
    pub const DEFAULT_CLUSTERS: usize = 3;
    pub const MAX_KMEANS_ITERATIONS: usize = 100;
}

fn numeric(dataset: &Dataset, field: &str) -> Result<Vec<f64>> {
    Ok(dataset.numeric_column(field)?)
}

/// Centered cross moment of two equally long columns.
fn co_moment(xs: &[f64], ys: &[f64]) -> (Moments, Moments, f64) {
    let (mut mx, mut my) = (Moments::default(), Moments::default());
    let mut cxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx.mean;
        mx.push(x);
        my.push(y);
        cxy += dx * (y - my.mean);
    }
    (mx, my, cxy)
}

pub fn correlation(dataset: &Dataset, f1: &str, f2: &str) -> Result<RelationshipFact> {
    if f1 == f2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "correlation of {f1:?} with itself"
        )));
    }
    let xs = numeric(dataset, f1)?;
    let ys = numeric(dataset, f2)?;
    if xs.len() < 2 {
        return Err(AnalysisError::TooFewRows {
            needed: 2,
            got: xs.len(),
        });
    }
    let r = pearson(&xs, &ys, f1, f2)?;
    let strength = if r.abs() >= bands::STRONG_CORRELATION {
        "strongly"
    } else if r.abs() >= bands::MODERATE_CORRELATION {
        "moderately"
    } else {
        "weakly"
    };
    let direction = if r >= 0.0 { "positively" } else { "negatively" };
    Ok(RelationshipFact {
        kind: RelationKind::Correlation,
        fields: vec![f1.to_string(), f2.to_string()],
        keys: Vec::new(),
        value: r,
        label: format!("{f1} and {f2} are {strength} {direction} correlated (r={r:.2})"),
    })
}

fn pearson(xs: &[f64], ys: &[f64], fx: &str, fy: &str) -> Result<f64> {
    let mx = Moments::of(xs);
    let my = Moments::of(ys);
    if mx.m2 <= 0.0 {
        return Err(AnalysisError::DegenerateVariance(fx.to_string()));
    }
    if my.m2 <= 0.0 {
        return Err(AnalysisError::DegenerateVariance(fy.to_string()));
    }
    // Symmetric in (x, y): sum of products and product of norms both commute.
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mx.mean) * (y - my.mean))
        .sum();
    Ok((sxy / (mx.m2 * my.m2).sqrt()).clamp(-1.0, 1.0))
}

/// Rows whose |z| is at least `z_threshold`, most extreme first.
pub fn detect_outliers(
    dataset: &Dataset,
    field: &str,
    z_threshold: f64,
) -> Result<Vec<RelationshipFact>> {
    let values = numeric(dataset, field)?;
    if values.len() < 3 {
        return Err(AnalysisError::TooFewRows {
            needed: 3,
            got: values.len(),
        });
    }
    let m = Moments::of(&values);
    let sd = m.variance().sqrt();
    if sd <= 0.0 {
        return Err(AnalysisError::DegenerateVariance(field.to_string()));
    }
    let mut hits: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - m.mean) / sd))
        .filter(|(_, z)| z.abs() >= z_threshold)
        .collect();
    hits.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    Ok(hits
        .into_iter()
        .map(|(i, z)| {
            let key = dataset.rows()[i].key().to_string();
            let side = if z > 0.0 { "high" } else { "low" };
            RelationshipFact {
                kind: RelationKind::Outlier,
                fields: vec![field.to_string()],
                label: format!("{key} is an unusually {side} {field} (z={z:.2})"),
                keys: vec![key],
                value: z,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendDirection {
    Increasing,
    Decreasing,
    Flat,
}

impl TrendDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            TrendDirection::Increasing => "increasing",
            TrendDirection::Decreasing => "decreasing",
            TrendDirection::Flat => "flat",
        }
    }
}

/// Classifies a slope. Flat when `|slope| * range(x) / range(y)` is under
/// [`bands::FLAT_TREND`], or when y does not vary at all.
pub fn trend_direction(slope: f64, x_range: f64, y_range: f64) -> TrendDirection {
    if y_range <= 0.0 || (slope.abs() * x_range / y_range) < bands::FLAT_TREND {
        TrendDirection::Flat
    } else if slope > 0.0 {
        TrendDirection::Increasing
    } else {
        TrendDirection::Decreasing
    }
}

/// Least-squares slope of `y` on `x`.
pub fn trend(dataset: &Dataset, x: &str, y: &str) -> Result<RelationshipFact> {
    let xs = numeric(dataset, x)?;
    let ys = numeric(dataset, y)?;
    let (mx, _, cxy) = co_moment(&xs, &ys);
    if mx.m2 <= 0.0 {
        return Err(AnalysisError::DegenerateVariance(x.to_string()));
    }
    let slope = cxy / mx.m2;
    let range = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let direction = trend_direction(slope, range(&xs), range(&ys));
    Ok(RelationshipFact {
        kind: RelationKind::Trend,
        fields: vec![x.to_string(), y.to_string()],
        keys: Vec::new(),
        value: slope,
        label: format!(
            "{y} is {} with {x} (slope={slope:.4})",
            direction.as_str()
        ),
    })
}

/// Deterministic k-means over 1 or 2 numeric fields.
///
/// Coordinates are min-max normalized per field. The k initial centroids are
/// the rows found at evenly spaced positions of the rows sorted by the first
/// field (ties broken by row order), so no random state is involved. Ties in
/// assignment go to the lower cluster index; an emptied cluster keeps its
/// previous centroid.
pub fn cluster(dataset: &Dataset, fields: &[&str], k: usize) -> Result<Vec<RelationshipFact>> {
    if fields.is_empty() || fields.len() > 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "clustering takes 1 or 2 fields, got {}",
            fields.len()
        )));
    }
    let n = dataset.row_count();
    if k < 2 || k > n {
        return Err(AnalysisError::TooFewRows { needed: k.max(2), got: n });
    }
    let columns = fields
        .iter()
        .map(|f| numeric(dataset, f).map(|c| normalize(&c)))
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(a.cmp(&b)));
    let mut centroids: Vec<Vec<f64>> = (0..k)
        .map(|i| points[order[i * (n - 1) / (k - 1)]].clone())
        .collect();

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..bands::MAX_KMEANS_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest(p, &centroids);
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (d, coord) in centroid.iter_mut().enumerate() {
                *coord = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }

    let field_list = fields.join(", ");
    Ok((0..k)
        .map(|c| {
            let keys: Vec<String> = dataset
                .rows()
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(r, _)| r.key().to_string())
                .collect();
            RelationshipFact {
                kind: RelationKind::Cluster,
                fields: fields.iter().map(|f| f.to_string()).collect(),
                label: format!(
                    "cluster {} of {k} on {field_list}: {}",
                    c + 1,
                    keys.join(", ")
                ),
                keys,
                value: c as f64,
            }
        })
        .collect())
}

fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let dist = |c: &Vec<f64>| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut best = 0;
    let mut best_d = dist(&centroids[0]);
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = dist(c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Pairwise correlations for every pair of numeric fields, skipping
/// constant fields.
pub fn all_correlations(dataset: &Dataset) -> Vec<RelationshipFact> {
    let names: Vec<&str> = dataset
        .schema()
        .iter()
        .filter(|f| f.kind == FieldKind::Numeric)
        .map(|f| f.name.as_str())
        .collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            if let Ok(fact) = correlation(dataset, a, b) {
                out.push(fact);
            }
        }
    }
    out
}
