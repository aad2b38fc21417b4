//! RST-Parseval: micro-averaged F1 over unlabeled, nuclearity-labeled and
//! fully labeled spans of binarized trees. The root span is included.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{binarize, ModelError, Nuclearity, ParagraphRelation, RstTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub nuclearity: Option<Nuclearity>,
    pub relation: Option<ParagraphRelation>,
}

pub type SpanSet = HashSet<LabeledSpan>;

/// One labelled span per internal node of the binarized tree.
pub fn spans(t: &RstTree) -> Result<SpanSet, ModelError> {
    let bin = binarize(t)?;
    Ok(spans_of_binary(&bin))
}

fn spans_of_binary(bin: &RstTree) -> SpanSet {
    let mut out = SpanSet::new();
    bin.walk_preorder(&mut |node| {
        if let RstTree::Node {
            relation,
            nuclearity,
            ..
        } = node
        {
            let span = node.span();
            out.insert(LabeledSpan {
                start: span.start,
                end: span.end,
                nuclearity: Some(*nuclearity),
                relation: Some(*relation),
            });
        }
    });
    out
}

/// Raw match counts, aggregated by summation across tree pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub pred_spans: usize,
    pub gold_spans: usize,
    pub span_matches: usize,
    pub nuclearity_matches: usize,
    pub relation_matches: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: &MatchCounts) {
        self.pred_spans += other.pred_spans;
        self.gold_spans += other.gold_spans;
        self.span_matches += other.span_matches;
        self.nuclearity_matches += other.nuclearity_matches;
        self.relation_matches += other.relation_matches;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalScores {
    pub span_f1: f64,
    pub nuclearity_f1: f64,
    pub relation_f1: f64,
    pub counts: MatchCounts,
}

#[derive(Debug, thiserror::Error)]
pub enum ParsevalError {
    #[error("{preds} predicted trees but {golds} gold trees")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("pair {index}: predicted tree has {pred} EDUs, gold has {gold}")]
    LeafMismatch { index: usize, pred: usize, gold: usize },
    #[error("pair {index}: {source}")]
    Tree {
        index: usize,
        #[source]
        source: ModelError,
    },
}

/// Harmonic mean of precision and recall. Two empty span sets agree
/// perfectly, so single-EDU paragraphs score 1.0 against themselves.
pub fn f1(matched: usize, predicted: usize, gold: usize) -> f64 {
    if predicted == 0 && gold == 0 {
        return 1.0;
    }
    let p = if predicted == 0 { 0.0 } else { matched as f64 / predicted as f64 };
    let r = if gold == 0 { 0.0 } else { matched as f64 / gold as f64 };
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn match_counts(pred: &RstTree, gold: &RstTree) -> Result<MatchCounts, ModelError> {
    let p = spans(pred)?;
    let g = spans(gold)?;
    let unlabeled = |s: &SpanSet| -> HashSet<(usize, usize)> {
        s.iter().map(|x| (x.start, x.end)).collect()
    };
    let with_nuc = |s: &SpanSet| -> HashSet<(usize, usize, Option<Nuclearity>)> {
        s.iter().map(|x| (x.start, x.end, x.nuclearity)).collect()
    };
    Ok(MatchCounts {
        pred_spans: p.len(),
        gold_spans: g.len(),
        span_matches: unlabeled(&p).intersection(&unlabeled(&g)).count(),
        nuclearity_matches: with_nuc(&p).intersection(&with_nuc(&g)).count(),
        relation_matches: p.intersection(&g).count(),
    })
}

pub fn scores_from_counts(counts: MatchCounts) -> ParsevalScores {
    let f = |m| f1(m, counts.pred_spans, counts.gold_spans);
    ParsevalScores {
        span_f1: f(counts.span_matches),
        nuclearity_f1: f(counts.nuclearity_matches),
        relation_f1: f(counts.relation_matches),
        counts,
    }
}

/// Corpus-level micro-averaged Parseval scores.
pub fn evaluate(preds: &[RstTree], golds: &[RstTree]) -> Result<ParsevalScores, ParsevalError> {
    if preds.len() != golds.len() {
        return Err(ParsevalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let mut total = MatchCounts::default();
    for (index, (p, g)) in preds.iter().zip(golds).enumerate() {
        let (pn, gn) = (p.leaf_count(), g.leaf_count());
        if pn != gn {
            return Err(ParsevalError::LeafMismatch {
                index,
                pred: pn,
                gold: gn,
            });
        }
        let counts = match_counts(p, g).map_err(|source| ParsevalError::Tree { index, source })?;
        total.add(&counts);
    }
    Ok(scores_from_counts(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nuclearity::*;
    use crate::model::ParagraphRelation::*;

    fn l(i: usize) -> RstTree {
        RstTree::leaf(i)
    }

    fn unlabeled(t: &RstTree) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = spans(t).unwrap().iter().map(|s| (s.start, s.end)).collect();
        v.sort();
        v
    }

    #[test]
    fn leaf_has_no_spans() {
        assert!(spans(&l(0)).unwrap().is_empty());
    }

    #[test]
    fn two_leaf_span() {
        let t = RstTree::node(Cause, NucleusSatellite, vec![l(0), l(1)]);
        let s: Vec<_> = spans(&t).unwrap().into_iter().collect();
        assert_eq!(
            s,
            vec![LabeledSpan {
                start: 0,
                end: 1,
                nuclearity: Some(NucleusSatellite),
                relation: Some(Cause)
            }]
        );
    }

    #[test]
    fn right_branching_three_leaves() {
        let t = RstTree::join(Sequence, l(0), RstTree::join(Sequence, l(1), l(2)));
        assert_eq!(unlabeled(&t), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn half_matching_spans() {
        let gold = RstTree::join(Sequence, RstTree::join(Sequence, l(0), l(1)), l(2));
        let pred = RstTree::join(Sequence, l(0), RstTree::join(Sequence, l(1), l(2)));
        let s = evaluate(&[pred], &[gold]).unwrap();
        assert_eq!(s.span_f1, 0.5);
        assert_eq!(s.counts.span_matches, 1);
    }

    #[test]
    fn identical_trees_score_one() {
        let t = RstTree::join(Cause, l(0), RstTree::join(Parallel, l(1), l(2)));
        let s = evaluate(&[t.clone(), l(0)], &[t, l(0)]).unwrap();
        assert_eq!((s.span_f1, s.nuclearity_f1, s.relation_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn single_leaf_corpus_is_perfect() {
        let s = evaluate(&[l(0)], &[l(0)]).unwrap();
        assert_eq!((s.span_f1, s.nuclearity_f1, s.relation_f1), (1.0, 1.0, 1.0));
        assert_eq!(f1(0, 2, 0), 0.0);
        assert_eq!(f1(0, 0, 3), 0.0);
    }

    #[test]
    fn labels_tiered() {
        let gold = RstTree::node(Cause, NucleusSatellite, vec![l(0), l(1)]);
        let nuc_ok = RstTree::node(Background, NucleusSatellite, vec![l(0), l(1)]);
        let nuc_bad = RstTree::node(Cause, SatelliteNucleus, vec![l(0), l(1)]);
        let a = evaluate(&[nuc_ok], &[gold.clone()]).unwrap();
        assert_eq!((a.span_f1, a.nuclearity_f1, a.relation_f1), (1.0, 1.0, 0.0));
        let b = evaluate(&[nuc_bad], &[gold]).unwrap();
        assert_eq!((b.span_f1, b.nuclearity_f1, b.relation_f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn mismatches_are_errors() {
        let t = RstTree::join(Cause, l(0), l(1));
        assert!(matches!(
            evaluate(&[t.clone()], &[]),
            Err(ParsevalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            evaluate(&[t], &[l(0)]),
            Err(ParsevalError::LeafMismatch { index: 0, .. })
        ));
    }
}
