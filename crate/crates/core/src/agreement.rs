//! Nominal Krippendorff's alpha and its application to discourse act and
//! paragraph relation annotations.
//!
//! Relation agreement uses adjacent-sentence pairs as units: in a binarized
//! tree every boundary between sentence `i` and `i + 1` is split by exactly one
//! internal node, whose relation is the coder's label for that unit. Per-kind
//! reliability binarizes labels into "kind" vs "none".

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::CorpusRecord;
use crate::model::{binarize, ActKind, ParagraphRelation, RstTree};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AgreementError {
    #[error("alpha is undefined: only {0} unit(s) have two or more labels")]
    Undefined(usize),
    #[error("no pairable data: no video has two or more annotator records")]
    NoPairableData,
    #[error("video {video_id:?}: annotator records disagree on {what}")]
    Inconsistent { video_id: String, what: String },
}

/// Nominal labels indexed by (unit, coder); missing entries are unlabeled.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelMatrix {
    pub units: Vec<String>,
    pub coders: Vec<String>,
    pub labels: BTreeMap<(usize, usize), String>,
}

impl LabelMatrix {
    pub fn new(units: Vec<String>, coders: Vec<String>) -> Self {
        LabelMatrix {
            units,
            coders,
            labels: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, unit: usize, coder: usize, label: impl Into<String>) {
        self.labels.insert((unit, coder), label.into());
    }

    /// Labels grouped per unit, in coder order.
    fn values_by_unit(&self) -> BTreeMap<usize, Vec<&str>> {
        let mut out: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for ((u, _), v) in &self.labels {
            out.entry(*u).or_default().push(v.as_str());
        }
        out
    }
}

/// `α = 1 − D_o / D_e` from the coincidence matrix with nominal distance.
/// Perfect agreement yields exactly 1.0, including when `D_e = 0`.
pub fn krippendorff_alpha(m: &LabelMatrix) -> Result<f64, AgreementError> {
    let pairable: Vec<Vec<&str>> = m
        .values_by_unit()
        .into_values()
        .filter(|vs| vs.len() >= 2)
        .collect();
    if pairable.len() < 2 {
        return Err(AgreementError::Undefined(pairable.len()));
    }

    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for vs in &pairable {
        for v in vs {
            let next = index.len();
            index.entry(v).or_insert(next);
        }
    }
    let k = index.len();
    let mut coincidence = vec![vec![0.0f64; k]; k];
    for vs in &pairable {
        let weight = 1.0 / (vs.len() as f64 - 1.0);
        let mut counts = vec![0usize; k];
        for v in vs {
            counts[index[v]] += 1;
        }
        for c in 0..k {
            for d in 0..k {
                // ordered pairs of values from different coders
                let pairs = if c == d {
                    counts[c] * counts[c].saturating_sub(1)
                } else {
                    counts[c] * counts[d]
                };
                coincidence[c][d] += pairs as f64 * weight;
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += coincidence[c][d];
                expected += marginals[c] * marginals[d];
            }
        }
    }
    if observed == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Records grouped by video, keeping only videos with two or more annotator
/// copies.
fn multiply_annotated(records: &[CorpusRecord]) -> BTreeMap<&str, Vec<&CorpusRecord>> {
    let mut by_video: BTreeMap<&str, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        by_video.entry(r.video_id.as_str()).or_default().push(r);
    }
    by_video.retain(|_, rs| rs.len() >= 2);
    by_video
}

fn coder_name(r: &CorpusRecord, position: usize) -> String {
    r.annotator_id
        .clone()
        .unwrap_or_else(|| format!("#{}", position))
}

/// Relation label of each adjacent-sentence boundary `i | i+1`.
pub fn boundary_relations(tree: &RstTree) -> Option<Vec<ParagraphRelation>> {
    let bin = binarize(tree).ok()?;
    let mut out = vec![None; bin.leaf_count().saturating_sub(1)];
    bin.walk_preorder(&mut |node| {
        if let RstTree::Node {
            relation, children, ..
        } = node
        {
            out[children[0].last_edu()] = Some(*relation);
        }
    });
    out.into_iter().collect()
}

const NONE_LABEL: &str = "none";

fn binary_alpha<K: Copy + Ord>(
    units: Vec<String>,
    coders: Vec<String>,
    labels: &[(usize, usize, K)],
    kinds: &BTreeSet<K>,
    name: impl Fn(K) -> &'static str,
) -> Result<BTreeMap<K, f64>, AgreementError> {
    let mut out = BTreeMap::new();
    for &kind in kinds {
        let mut m = LabelMatrix::new(units.clone(), coders.clone());
        for &(u, c, k) in labels {
            m.set(u, c, if k == kind { name(kind) } else { NONE_LABEL });
        }
        out.insert(kind, krippendorff_alpha(&m)?);
    }
    Ok(out)
}

/// Per-relation alpha over adjacent-sentence units, for every relation kind
/// that occurs in at least one doubly annotated paragraph.
pub fn per_relation_alpha(
    records: &[CorpusRecord],
) -> Result<BTreeMap<ParagraphRelation, f64>, AgreementError> {
    let groups = multiply_annotated(records);
    if groups.is_empty() {
        return Err(AgreementError::NoPairableData);
    }
    let mut units = Vec::new();
    let mut coders: Vec<String> = Vec::new();
    let mut coder_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut kinds = BTreeSet::new();
    for (video_id, rs) in groups {
        let n = rs[0].sentences.len();
        let base = units.len();
        for i in 0..n.saturating_sub(1) {
            units.push(format!("{}:{}-{}", video_id, i, i + 1));
        }
        for (pos, r) in rs.iter().enumerate() {
            if r.sentences.len() != n {
                return Err(AgreementError::Inconsistent {
                    video_id: video_id.to_string(),
                    what: "sentence count".into(),
                });
            }
            let name = coder_name(r, pos);
            let next = coder_ids.len();
            let coder = *coder_ids.entry(name.clone()).or_insert_with(|| {
                coders.push(name);
                next
            });
            let rels = boundary_relations(&r.paragraph_tree).ok_or_else(|| {
                AgreementError::Inconsistent {
                    video_id: video_id.to_string(),
                    what: "tree validity".into(),
                }
            })?;
            for (i, rel) in rels.into_iter().enumerate() {
                kinds.insert(rel);
                labels.push((base + i, coder, rel));
            }
        }
    }
    binary_alpha(units, coders, &labels, &kinds, ParagraphRelation::name)
}

/// Per-act alpha over shots: a coder's label for a shot is the kind of the
/// first act it is attached to.
pub fn per_act_alpha(records: &[CorpusRecord]) -> Result<BTreeMap<ActKind, f64>, AgreementError> {
    let groups = multiply_annotated(records);
    if groups.is_empty() {
        return Err(AgreementError::NoPairableData);
    }
    let mut units = Vec::new();
    let mut unit_ids: HashMap<String, usize> = HashMap::new();
    let mut coders: Vec<String> = Vec::new();
    let mut coder_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut kinds = BTreeSet::new();
    for (video_id, rs) in groups {
        for (pos, r) in rs.iter().enumerate() {
            let name = coder_name(r, pos);
            let next = coder_ids.len();
            let coder = *coder_ids.entry(name.clone()).or_insert_with(|| {
                coders.push(name);
                next
            });
            for shot in &r.video_graph.shots {
                let Some((act, _)) = r.video_graph.primary_attachment(&shot.id) else {
                    continue;
                };
                let key = format!("{}:{}", video_id, shot.id);
                let next = unit_ids.len();
                let unit = *unit_ids.entry(key.clone()).or_insert_with(|| {
                    units.push(key);
                    next
                });
                kinds.insert(act.kind);
                labels.push((unit, coder, act.kind));
            }
        }
    }
    binary_alpha(units, coders, &labels, &kinds, ActKind::name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub videos: usize,
    pub relations: BTreeMap<ParagraphRelation, f64>,
    pub acts: BTreeMap<ActKind, f64>,
}

pub fn agreement_report(records: &[CorpusRecord]) -> Result<AgreementReport, AgreementError> {
    Ok(AgreementReport {
        videos: multiply_annotated(records).len(),
        relations: per_relation_alpha(records)?,
        acts: per_act_alpha(records)?,
    })
}
