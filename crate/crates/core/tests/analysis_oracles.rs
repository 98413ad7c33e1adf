mod common;

use std::collections::BTreeSet;

use bimodal_core::analysis::{all_correlations, cluster, correlation, detect_outliers, trend, AnalysisError};
use bimodal_core::dataset::{compute_statistic, describe_l1, StatisticKind};
use common::{seattle, table};

fn naive_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-12)
}

/// Textbook Lloyd iteration written independently of the library: min-max
/// scaling, seeds at sorted positions i*(n-1)/(k-1), nearest centroid with
/// ties to the lower index, empty clusters keep their centroid.
fn oracle_kmeans(xs: &[f64], ys: &[f64], k: usize) -> Vec<usize> {
    let scale = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        v.iter().map(|x| (x - lo) / (hi - lo)).collect::<Vec<_>>()
    };
    let (sx, sy) = (scale(xs), scale(ys));
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| sx[a].partial_cmp(&sx[b]).unwrap().then(a.cmp(&b)));
    let mut cx: Vec<f64> = (0..k).map(|i| sx[idx[i * (n - 1) / (k - 1)]]).collect();
    let mut cy: Vec<f64> = (0..k).map(|i| sy[idx[i * (n - 1) / (k - 1)]]).collect();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..100 {
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let d: Vec<f64> = (0..k).map(|c| (sx[i] - cx[c]).powi(2) + (sy[i] - cy[c]).powi(2)).collect();
                (0..k).fold(0, |best, c| if d[c] < d[best] { c } else { best })
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|i| labels[*i] == c).collect();
            if !members.is_empty() {
                cx[c] = members.iter().map(|i| sx[*i]).sum::<f64>() / members.len() as f64;
                cy[c] = members.iter().map(|i| sy[*i]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    labels
}

#[test]
fn seattle_summary_statistics() {
    let ds = seattle();
    let price = ds.numeric_column("avg_price").unwrap();
    assert!(close(compute_statistic(&ds, "avg_price", StatisticKind::Mean).unwrap(), naive_mean(&price)));
    assert_eq!(compute_statistic(&ds, "avg_price", StatisticKind::Mean).unwrap(), 755000.0);
    assert_eq!(compute_statistic(&ds, "avg_price", StatisticKind::Median).unwrap(), 750000.0);
    assert_eq!(compute_statistic(&ds, "avg_price", StatisticKind::Min).unwrap(), 310000.0);
    assert_eq!(compute_statistic(&ds, "avg_price", StatisticKind::Max).unwrap(), 1250000.0);
    assert_eq!(compute_statistic(&ds, "zip_code", StatisticKind::Count).unwrap(), 24.0);
    assert!(describe_l1(&ds).len() >= ds.schema().len());
}

#[test]
fn seattle_relationships_match_brute_force() {
    let ds = seattle();
    let x = ds.numeric_column("avg_bathrooms").unwrap();
    let y = ds.numeric_column("avg_price").unwrap();
    let (mx, my) = (naive_mean(&x), naive_mean(&y));
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();

    let r = correlation(&ds, "avg_bathrooms", "avg_price").unwrap();
    assert!(close(r.value, sxy / (sxx * syy).sqrt()));
    assert!(r.label.contains("strongly positively"), "{}", r.label);

    let t = trend(&ds, "avg_bathrooms", "avg_price").unwrap();
    assert!(close(t.value, sxy / sxx));
    assert!(t.label.contains("increasing"), "{}", t.label);

    // Brute-force z scan for the price outliers.
    let sd = (syy / y.len() as f64).sqrt();
    let expected: BTreeSet<String> = ds
        .rows()
        .iter()
        .zip(&y)
        .filter(|(_, v)| ((*v - my) / sd).abs() >= 2.0)
        .map(|(r, _)| r.key().to_string())
        .collect();
    let got: BTreeSet<String> = detect_outliers(&ds, "avg_price", 2.0)
        .unwrap()
        .into_iter()
        .flat_map(|f| f.keys)
        .collect();
    assert_eq!(got, expected);

    let n_numeric = 5;
    assert_eq!(all_correlations(&ds).len(), n_numeric * (n_numeric - 1) / 2);
}

#[test]
fn seattle_clusters_match_independent_kmeans() {
    let ds = seattle();
    let xs = ds.numeric_column("avg_price").unwrap();
    let ys = ds.numeric_column("avg_lot_size").unwrap();
    let labels = oracle_kmeans(&xs, &ys, 3);
    let facts = cluster(&ds, &["avg_price", "avg_lot_size"], 3).unwrap();
    assert_eq!(facts.len(), 3);
    for (c, fact) in facts.iter().enumerate() {
        assert_eq!(fact.value, c as f64);
        let expected: Vec<String> = ds
            .rows()
            .iter()
            .zip(&labels)
            .filter(|(_, l)| **l == c)
            .map(|(r, _)| r.key().to_string())
            .collect();
        assert_eq!(fact.keys, expected, "cluster {c}");
    }
    // Every row lands in exactly one cluster.
    let total: usize = facts.iter().map(|f| f.keys.len()).sum();
    assert_eq!(total, ds.row_count());
}

#[test]
fn degenerate_inputs_are_errors() {
    let ds = table(&[vec![1.0, 1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0, 4.0]]);
    assert!(matches!(correlation(&ds, "c0", "c1"), Err(AnalysisError::DegenerateVariance(_))));
    assert!(matches!(detect_outliers(&ds, "c0", 2.0), Err(AnalysisError::DegenerateVariance(_))));
    assert!(matches!(trend(&ds, "c0", "c1"), Err(AnalysisError::DegenerateVariance(_))));
    assert!(trend(&ds, "c1", "c0").unwrap().label.contains("flat"));
    assert!(matches!(cluster(&ds, &["c1"], 5), Err(AnalysisError::TooFewRows { .. })));
    assert!(matches!(cluster(&ds, &["c0", "c1", "c1"], 2), Err(AnalysisError::InvalidArgument(_))));
}
