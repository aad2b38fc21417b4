//! Coherence scoring: relation-transition likelihood and relation locality for
//! paragraphs, act composition for videos, and the video-conditioned verdict.

use serde::{Deserialize, Serialize};

use crate::model::{
    binarize, relation_sequence, validate_video_graph, ActKind, ModelError, ParagraphRelation,
    RstTree, ValidationReport, VideoDiscourseGraph, VideoRelation,
};

/// Conditioning states: BOS plus the ten relations.
pub const N_CONTEXTS: usize = ParagraphRelation::COUNT + 1;
/// Successors: the ten relations plus EOS.
pub const N_SUCCESSORS: usize = ParagraphRelation::COUNT + 1;
pub const BOS: usize = ParagraphRelation::COUNT;
pub const EOS: usize = ParagraphRelation::COUNT;

#[derive(Debug, thiserror::Error)]
pub enum CoherenceError {
    #[error("cannot fit a transition model on an empty corpus")]
    EmptyCorpus,
    #[error("smoothing constant must be finite and positive, got {0}")]
    BadSmoothing(f64),
    #[error(transparent)]
    Tree(#[from] ModelError),
    #[error("invalid video graph: {0}")]
    InvalidGraph(ValidationReport),
    #[error("video graph has no edges")]
    NoEdges,
    #[error("surface order must be a permutation of 0..{0}")]
    BadSurfaceOrder(usize),
    #[error("unsupported transition model version {0}")]
    Version(u32),
}

/// Add-k smoothed relation bigram model with BOS/EOS markers.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    k: f64,
    counts: Vec<[u64; N_SUCCESSORS]>,
    log_probs: Vec<[f64; N_SUCCESSORS]>,
}

#[derive(Serialize, Deserialize)]
struct TransitionModelFile {
    version: u32,
    k: f64,
    counts: Vec<[u64; N_SUCCESSORS]>,
}

impl TransitionModel {
    fn from_counts(counts: Vec<[u64; N_SUCCESSORS]>, k: f64) -> Self {
        let log_probs = counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                let denom = total as f64 + k * N_SUCCESSORS as f64;
                let mut out = [0.0; N_SUCCESSORS];
                for (o, &c) in out.iter_mut().zip(row) {
                    *o = ((c as f64 + k) / denom).ln();
                }
                out
            })
            .collect();
        TransitionModel {
            k,
            counts,
            log_probs,
        }
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `log P(successor | context)`; contexts and successors use the
    /// `BOS`/`EOS` indices above, relations their enumeration index.
    pub fn log_prob(&self, context: usize, successor: usize) -> f64 {
        self.log_probs[context][successor]
    }

    pub fn prob(&self, context: usize, successor: usize) -> f64 {
        self.log_prob(context, successor).exp()
    }

    pub fn count(&self, context: usize, successor: usize) -> u64 {
        self.counts[context][successor]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TransitionModelFile {
            version: 1,
            k: self.k,
            counts: self.counts.clone(),
        })
        .expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let file: TransitionModelFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Box::new(CoherenceError::Version(file.version)));
        }
        if !(file.k.is_finite() && file.k > 0.0) {
            return Err(Box::new(CoherenceError::BadSmoothing(file.k)));
        }
        if file.counts.len() != N_CONTEXTS {
            return Err(format!("expected {} count rows, got {}", N_CONTEXTS, file.counts.len()).into());
        }
        Ok(Self::from_counts(file.counts, file.k))
    }
}

/// Relation kinds of a tree in relation-sequence order.
pub fn relation_kinds(tree: &RstTree) -> Result<Vec<ParagraphRelation>, ModelError> {
    Ok(relation_sequence(tree)?.into_iter().map(|l| l.relation).collect())
}

/// Symbol path `BOS r1 .. rn EOS` as (context, successor) index pairs.
fn transitions(kinds: &[ParagraphRelation]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(kinds.len() + 1);
    let mut prev = BOS;
    for r in kinds {
        out.push((prev, r.index()));
        prev = r.index();
    }
    out.push((prev, EOS));
    out
}

pub fn fit_transitions(trees: &[RstTree], k: f64) -> Result<TransitionModel, CoherenceError> {
    if trees.is_empty() {
        return Err(CoherenceError::EmptyCorpus);
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(CoherenceError::BadSmoothing(k));
    }
    let mut counts = vec![[0u64; N_SUCCESSORS]; N_CONTEXTS];
    for t in trees {
        for (c, s) in transitions(&relation_kinds(t)?) {
            counts[c][s] += 1;
        }
    }
    Ok(TransitionModel::from_counts(counts, k))
}

/// Mean log-probability of the sequence's transitions, BOS and EOS included.
pub fn transition_score_of_kinds(kinds: &[ParagraphRelation], model: &TransitionModel) -> f64 {
    let steps = transitions(kinds);
    steps.iter().map(|&(c, s)| model.log_prob(c, s)).sum::<f64>() / steps.len() as f64
}

pub fn transition_score(tree: &RstTree, model: &TransitionModel) -> Result<f64, CoherenceError> {
    Ok(transition_score_of_kinds(&relation_kinds(tree)?, model))
}

/// Locality with sentences in tree order.
pub fn locality_score(tree: &RstTree) -> Result<f64, CoherenceError> {
    let n = tree.leaf_count();
    let identity: Vec<usize> = (0..n).collect();
    locality_score_in_order(tree, &identity)
}

/// `1 / mean gap` over the mononuclear relations of the binarized tree, where
/// the gap is the surface distance between the head sentences the relation
/// connects (adjacent = 1). Multinuclear relations join coordinate spans and
/// contribute no gap. Trees without mononuclear relations score 1.0.
///
/// `surface[i]` is the position at which EDU `i` appears in the written text.
pub fn locality_score_in_order(tree: &RstTree, surface: &[usize]) -> Result<f64, CoherenceError> {
    let bin = binarize(tree)?;
    let n = bin.leaf_count();
    let mut seen = vec![false; n];
    if surface.len() != n || surface.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(CoherenceError::BadSurfaceOrder(n));
    }
    let mut gaps = Vec::new();
    bin.walk_preorder(&mut |node| {
        if let RstTree::Node {
            relation, children, ..
        } = node
        {
            if !relation.is_multinuclear() {
                let a = surface[children[0].head_edu()];
                let b = surface[children[1].head_edu()];
                gaps.push(a.abs_diff(b) as f64);
            }
        }
    });
    if gaps.is_empty() {
        return Ok(1.0);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(1.0 / mean)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps a mean log-probability to (0, 1), centred on a uniform successor
/// distribution: a paragraph exactly as likely as uniform scores 0.5.
pub fn normalize_transition_score(score: f64) -> f64 {
    logistic(score + (N_SUCCESSORS as f64).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub transition_score: f64,
    pub transition_normalized: f64,
    pub locality_score: f64,
    /// `transition_normalized × locality_score`.
    pub combined: f64,
}

pub fn paragraph_coherence(tree: &RstTree, model: &TransitionModel) -> Result<CoherenceReport, CoherenceError> {
    let n = tree.leaf_count();
    let identity: Vec<usize> = (0..n).collect();
    paragraph_coherence_in_order(tree, &identity, model)
}

pub fn paragraph_coherence_in_order(
    tree: &RstTree,
    surface: &[usize],
    model: &TransitionModel,
) -> Result<CoherenceReport, CoherenceError> {
    let ts = transition_score(tree, model)?;
    let tn = normalize_transition_score(ts);
    let loc = locality_score_in_order(tree, surface)?;
    Ok(CoherenceReport {
        transition_score: ts,
        transition_normalized: tn,
        locality_score: loc,
        combined: tn * loc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoCoherenceWeights {
    pub act: f64,
    pub repetition: f64,
}

impl Default for VideoCoherenceWeights {
    fn default() -> Self {
        VideoCoherenceWeights {
            act: 0.7,
            repetition: 0.3,
        }
    }
}

/// `w_act · (primary share of attachments) + w_rep · (1 − repetition share of edges)`.
pub fn video_coherence(g: &VideoDiscourseGraph, weights: VideoCoherenceWeights) -> Result<f64, CoherenceError> {
    let report = validate_video_graph(g);
    if !report.is_ok() {
        return Err(CoherenceError::InvalidGraph(report));
    }
    if g.edges.is_empty() {
        return Err(CoherenceError::NoEdges);
    }
    let total = g.edges.len() as f64;
    let primary = g
        .attachment_kinds()
        .into_iter()
        .filter(|k| *k == ActKind::PrimaryContext)
        .count() as f64;
    let repetition = g
        .edges
        .iter()
        .filter(|e| e.rel == VideoRelation::Repetition)
        .count() as f64;
    Ok(weights.act * primary / total + weights.repetition * (1.0 - repetition / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Coherent,
    Incoherent,
    CoherentGivenVideo,
}

pub const DEFAULT_TAU_P: f64 = 0.5;
pub const DEFAULT_TAU_V: f64 = 0.5;

/// A paragraph below `tau_p` is excused when its video is itself incoherent.
pub fn conditioned_verdict(para_score: f64, video_score: f64, tau_p: f64, tau_v: f64) -> Verdict {
    if para_score >= tau_p {
        Verdict::Coherent
    } else if video_score < tau_v {
        Verdict::CoherentGivenVideo
    } else {
        Verdict::Incoherent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParagraphRelation::*;
    use crate::model::{right_branching, DiscourseAct, Edge, Shot};

    fn two_cause_tree() -> RstTree {
        RstTree::join(
            Sequence,
            RstTree::join(Cause, RstTree::leaf(0), RstTree::leaf(1)),
            RstTree::join(Cause, RstTree::leaf(2), RstTree::leaf(3)),
        )
    }

    #[test]
    fn rows_are_distributions() {
        let m = fit_transitions(&[two_cause_tree(), right_branching(&[Interpretation, Sequence])], 0.5).unwrap();
        for c in 0..N_CONTEXTS {
            let s: f64 = (0..N_SUCCESSORS).map(|x| m.prob(c, x)).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unseen_context_is_uniform_over_eleven() {
        let m = fit_transitions(&[right_branching(&[Cause])], 1.0).unwrap();
        for s in 0..N_SUCCESSORS {
            assert!((m.prob(Sentiment.index(), s) - 1.0 / 11.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_k_approaches_counts() {
        // Cause is followed once by Cause and once by EOS
        let m = fit_transitions(&[right_branching(&[Cause, Cause])], 1e-9).unwrap();
        assert!((m.prob(Cause.index(), Cause.index()) - 0.5).abs() < 1e-6);
        let m = fit_transitions(&[right_branching(&[Cause, Cause]), right_branching(&[Cause, Cause])], 1e-12)
            .unwrap();
        assert!((m.prob(BOS, Cause.index()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_leaf_scores_bos_to_eos() {
        let m = fit_transitions(&[two_cause_tree()], 0.1).unwrap();
        let s = transition_score(&RstTree::leaf(0), &m).unwrap();
        assert_eq!(s, m.log_prob(BOS, EOS));
    }

    #[test]
    fn locality_of_adjacent_and_crossed_cause_pairs() {
        assert_eq!(locality_score(&two_cause_tree()).unwrap(), 1.0);
        // written order S1 S2 S3 S4 with discourse pairs (S1,S3), (S2,S4)
        let crossed = locality_score_in_order(&two_cause_tree(), &[0, 2, 1, 3]).unwrap();
        assert_eq!(crossed, 0.5);
        assert_eq!(locality_score(&RstTree::leaf(0)).unwrap(), 1.0);
    }

    #[test]
    fn locality_uses_heads_not_span_edges() {
        // Cause(Sequence(0,1), 2): nucleus head 0, satellite head 2
        let t = RstTree::join(Cause, RstTree::join(Sequence, RstTree::leaf(0), RstTree::leaf(1)), RstTree::leaf(2));
        assert_eq!(locality_score(&t).unwrap(), 0.5);
        assert!(matches!(
            locality_score_in_order(&t, &[0, 0, 1]),
            Err(CoherenceError::BadSurfaceOrder(3))
        ));
    }

    fn graph(kinds: &[(ActKind, VideoRelation)]) -> VideoDiscourseGraph {
        let mut g = VideoDiscourseGraph::default();
        for (i, (kind, rel)) in kinds.iter().enumerate() {
            let act = format!("a{}", i);
            let shot = format!("s{}", i);
            g.acts.push(DiscourseAct::new(act.clone(), *kind));
            g.shots.push(Shot::new(shot.clone(), i as f64, i as f64 + 1.0));
            g.edges.push(Edge::new(act, shot, *rel));
        }
        g
    }

    #[test]
    fn video_coherence_extremes() {
        use ActKind::*;
        use VideoRelation::*;
        let w = VideoCoherenceWeights::default();
        let best = graph(&[(PrimaryContext, Interpretation), (PrimaryContext, Interpretation)]);
        assert_eq!(video_coherence(&best, w).unwrap(), 1.0);
        let worst = graph(&[(AuxiliaryContext, Repetition), (AuxiliaryContext, Repetition)]);
        assert_eq!(video_coherence(&worst, w).unwrap(), 0.0);
        assert!(matches!(
            video_coherence(&VideoDiscourseGraph::default(), w),
            Err(CoherenceError::NoEdges)
        ));
    }

    #[test]
    fn verdict_branches() {
        assert_eq!(conditioned_verdict(0.9, 0.1, 0.5, 0.5), Verdict::Coherent);
        assert_eq!(conditioned_verdict(0.2, 0.1, 0.5, 0.5), Verdict::CoherentGivenVideo);
        assert_eq!(conditioned_verdict(0.2, 0.9, 0.5, 0.5), Verdict::Incoherent);
    }

    #[test]
    fn model_json_round_trip() {
        let m = fit_transitions(&[two_cause_tree()], 0.25).unwrap();
        let back = TransitionModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
