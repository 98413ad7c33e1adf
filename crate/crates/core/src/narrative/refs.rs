use indexmap::IndexMap;

use super::{NarrativeDocument, SentenceItem};

/// chart id → display number, in display order.
pub type ChartNumbering = IndexMap<String, u32>;

/// Numbers charts 1..n by the first appearance of a reference to them in
/// document order and writes the numbers into every token.
pub fn renumber_chart_refs(doc: &mut NarrativeDocument) -> ChartNumbering {
    let mut numbering = ChartNumbering::new();
    for r in doc.chart_refs() {
        let next = numbering.len() as u32 + 1;
        numbering.entry(r.chart_id.clone()).or_insert(next);
    }
    for item in doc
        .paragraphs
        .iter_mut()
        .flat_map(|p| &mut p.sentences)
        .flat_map(|s| &mut s.items)
    {
        if let SentenceItem::ChartRef(r) = item {
            r.display_number = numbering.get(&r.chart_id).copied();
        }
    }
    numbering
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narrative::testing::{chart_ref, doc, leaf};
    use crate::narrative::SemanticLevel::L1;

    #[test]
    fn first_appearance_order() {
        let mut d = doc(vec![
            vec![vec![leaf("a", "x", L1, &[]), chart_ref("chartB")]],
            vec![vec![chart_ref("chartA"), chart_ref("chartB")]],
        ]);
        let map = renumber_chart_refs(&mut d);
        assert_eq!(map.into_iter().collect::<Vec<_>>(), vec![("chartB".into(), 1), ("chartA".into(), 2)]);
        let nums: Vec<_> = d.chart_refs().map(|r| r.display_number.unwrap()).collect();
        assert_eq!(nums, vec![1, 2, 1]);
    }

    #[test]
    fn empty_and_idempotent() {
        let mut d = doc(vec![vec![vec![leaf("a", "x", L1, &[])]]]);
        assert!(renumber_chart_refs(&mut d).is_empty());
        let mut d = doc(vec![vec![vec![chart_ref("c2"), chart_ref("c1")]]]);
        let first = renumber_chart_refs(&mut d);
        let snapshot = d.clone();
        assert_eq!(renumber_chart_refs(&mut d), first);
        assert_eq!(d, snapshot);
    }
}
