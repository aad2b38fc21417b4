//! JSON-lines annotation corpus: reading, writing, filtering, splitting and
//! descriptive statistics.
//!
//! One record per line:
//!
//! ```text
//! {"video_id":..,"annotator_id":..|null,"shots":[..],"acts":[..],"edges":[..],"sentences":[..],"tree":..}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    relation_sequence, validate_rst_tree, validate_video_graph, ActKind, DiscourseAct, Edge,
    ParagraphRelation, RstTree, Shot, ValidationReport, VideoDiscourseGraph, VideoRelation,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: record {video_id:?} is invalid: {report}")]
    Invalid {
        line: usize,
        video_id: String,
        report: ValidationReport,
    },
    #[error("line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("corpus is empty")]
    Empty,
    #[error("need {needed} records but corpus has {available}")]
    Insufficient { needed: usize, available: usize },
}

/// A video, its paragraph, and one annotator's discourse structures.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub video_id: String,
    pub annotator_id: Option<String>,
    pub video_graph: VideoDiscourseGraph,
    pub sentences: Vec<String>,
    pub paragraph_tree: RstTree,
}

impl CorpusRecord {
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_video_graph(&self.video_graph);
        report
            .violations
            .extend(validate_rst_tree(&self.paragraph_tree, self.sentences.len()).violations);
        report
    }

    pub fn shot_count(&self) -> usize {
        self.video_graph.shots.len()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&RecordWire::from(self)).expect("record serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct RecordWire {
    video_id: String,
    annotator_id: Option<String>,
    shots: Vec<Shot>,
    acts: Vec<DiscourseAct>,
    edges: Vec<Edge>,
    sentences: Vec<String>,
    tree: RstTree,
}

impl From<&CorpusRecord> for RecordWire {
    fn from(r: &CorpusRecord) -> Self {
        RecordWire {
            video_id: r.video_id.clone(),
            annotator_id: r.annotator_id.clone(),
            shots: r.video_graph.shots.clone(),
            acts: r.video_graph.acts.clone(),
            edges: r.video_graph.edges.clone(),
            sentences: r.sentences.clone(),
            tree: r.paragraph_tree.clone(),
        }
    }
}

impl From<RecordWire> for CorpusRecord {
    fn from(w: RecordWire) -> Self {
        CorpusRecord {
            video_id: w.video_id,
            annotator_id: w.annotator_id,
            video_graph: VideoDiscourseGraph {
                acts: w.acts,
                shots: w.shots,
                edges: w.edges,
            },
            sentences: w.sentences,
            paragraph_tree: w.tree,
        }
    }
}

/// Parses and validates one line. `line` is 1-based and only used for errors.
pub fn parse_record(text: &str, line: usize) -> Result<CorpusRecord, CorpusError> {
    let wire: RecordWire =
        serde_json::from_str(text).map_err(|source| CorpusError::Parse { line, source })?;
    let record = CorpusRecord::from(wire);
    let report = record.validate();
    if !report.is_ok() {
        return Err(CorpusError::Invalid {
            line,
            video_id: record.video_id,
            report,
        });
    }
    Ok(record)
}

/// Reads every record from a JSON-lines stream. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|source| CorpusError::Io {
            line: line_no,
            source,
        })?;
        if text.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&text, line_no)?);
    }
    Ok(records)
}

/// Writes records as canonical JSON lines (fixed key order, LF-terminated).
pub fn write_corpus<W: Write>(mut writer: W, records: &[CorpusRecord]) -> std::io::Result<()> {
    for r in records {
        writer.write_all(r.to_json_line().as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn corpus_to_string(records: &[CorpusRecord]) -> String {
    let mut buf = Vec::new();
    write_corpus(&mut buf, records).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Keeps records whose shot count lies in `[min, max]`.
pub fn filter_shots(
    records: &[CorpusRecord],
    min: usize,
    max: usize,
) -> Result<Vec<CorpusRecord>, CorpusError> {
    if min > max {
        return Err(CorpusError::Argument(format!(
            "minimum shot count {} exceeds maximum {}",
            min, max
        )));
    }
    Ok(records
        .iter()
        .filter(|r| (min..=max).contains(&r.shot_count()))
        .cloned()
        .collect())
}

pub const DEFAULT_MIN_SHOTS: usize = 3;
pub const DEFAULT_MAX_SHOTS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_records: usize,
    pub mean_shots: f64,
    pub mean_sentences: f64,
    /// Fraction of shot-act attachments per act kind.
    pub act_proportions: BTreeMap<ActKind, f64>,
    /// Fraction of binarized paragraph-tree relations per kind.
    pub relation_proportions: BTreeMap<ParagraphRelation, f64>,
    /// Fraction of act→shot edge labels per kind.
    pub video_relation_proportions: BTreeMap<VideoRelation, f64>,
}

fn normalize<K: Ord>(counts: BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect()
}

pub fn corpus_stats(records: &[CorpusRecord]) -> Result<CorpusStats, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = records.len() as f64;
    let mut acts = BTreeMap::new();
    let mut rels = BTreeMap::new();
    let mut video_rels = BTreeMap::new();
    for r in records {
        for kind in r.video_graph.attachment_kinds() {
            *acts.entry(kind).or_insert(0) += 1;
        }
        for e in &r.video_graph.edges {
            *video_rels.entry(e.rel).or_insert(0) += 1;
        }
        // read_corpus only yields valid trees; skip anything else silently
        if let Ok(links) = relation_sequence(&r.paragraph_tree) {
            for link in links {
                *rels.entry(link.relation).or_insert(0) += 1;
            }
        }
    }
    Ok(CorpusStats {
        n_records: records.len(),
        mean_shots: records.iter().map(|r| r.shot_count() as f64).sum::<f64>() / n,
        mean_sentences: records.iter().map(|r| r.sentences.len() as f64).sum::<f64>() / n,
        act_proportions: normalize(acts),
        relation_proportions: normalize(rels),
        video_relation_proportions: normalize(video_rels),
    })
}

/// Train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<CorpusRecord>,
    pub val: Vec<CorpusRecord>,
    pub test: Vec<CorpusRecord>,
}

/// Seeded shuffle, then consecutive slices of the requested sizes.
pub fn split(
    records: &[CorpusRecord],
    train_n: usize,
    val_n: usize,
    test_n: usize,
    seed: u64,
) -> Result<Split, CorpusError> {
    let needed = train_n + val_n + test_n;
    if needed > records.len() {
        return Err(CorpusError::Insufficient {
            needed,
            available: records.len(),
        });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| -> Vec<CorpusRecord> {
        order[range].iter().map(|&i| records[i].clone()).collect()
    };
    Ok(Split {
        train: take(0..train_n),
        val: take(train_n..train_n + val_n),
        test: take(train_n + val_n..needed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nuclearity;

    const HAND_RECORD: &str = r#"{"video_id":"v1","annotator_id":null,"shots":[{"id":"s0","start_s":0.0,"end_s":2.5},{"id":"s1","start_s":2.5,"end_s":4.0},{"id":"s2","start_s":4.0,"end_s":9.0}],"acts":[{"id":"a0","kind":"primary"}],"edges":[{"act":"a0","shot":"s0","rel":"interpretation"},{"act":"a0","shot":"s1","rel":"sequence"},{"act":"a0","shot":"s2","rel":"elaboration"}],"sentences":["A man stands on a stage.","Then he plays the guitar."],"tree":{"rel":"sequence","nuc":"NN","children":[{"edu":0},{"edu":1}]}}"#;

    fn record_with_shots(n: usize) -> CorpusRecord {
        let shots: Vec<Shot> = (0..n)
            .map(|i| Shot::new(format!("s{}", i), i as f64, i as f64 + 1.0))
            .collect();
        let edges = shots
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let rel = if i == 0 {
                    VideoRelation::Interpretation
                } else {
                    VideoRelation::Sequence
                };
                Edge::new("a0", s.id.clone(), rel)
            })
            .collect();
        CorpusRecord {
            video_id: format!("v{}", n),
            annotator_id: Some("ann1".into()),
            video_graph: VideoDiscourseGraph {
                acts: vec![DiscourseAct::new("a0", ActKind::PrimaryContext)],
                shots,
                edges,
            },
            sentences: vec!["one".into(), "two".into()],
            paragraph_tree: RstTree::node(
                ParagraphRelation::Cause,
                Nuclearity::NucleusSatellite,
                vec![RstTree::leaf(0), RstTree::leaf(1)],
            ),
        }
    }

    #[test]
    fn empty_stream_is_empty_corpus() {
        assert!(read_corpus("".as_bytes()).unwrap().is_empty());
        assert!(read_corpus("\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn hand_record_round_trips_byte_identically() {
        let records = read_corpus(HAND_RECORD.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].shot_count(), 3);
        assert_eq!(records[0].video_graph.acts.len(), 1);
        let out = corpus_to_string(&records);
        assert_eq!(out, format!("{}\n", HAND_RECORD));
        assert_eq!(read_corpus(out.as_bytes()).unwrap(), records);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = format!("{}\n{{not json\n", HAND_RECORD);
        match read_corpus(input.as_bytes()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn invalid_record_names_the_video() {
        let bad = HAND_RECORD.replace(r#"{"edu":1}"#, r#"{"edu":2}"#);
        match read_corpus(bad.as_bytes()) {
            Err(CorpusError::Invalid { line, video_id, report }) => {
                assert_eq!(line, 1);
                assert_eq!(video_id, "v1");
                assert!(report.has("missing_edu"));
            }
            other => panic!("expected validation error, got {:?}", other),
        }
    }

    #[test]
    fn thirty_one_shots_read_but_filtered() {
        let text = corpus_to_string(&[record_with_shots(31)]);
        let records = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        let kept = filter_shots(&records, DEFAULT_MIN_SHOTS, DEFAULT_MAX_SHOTS).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn filter_shots_boundaries() {
        let records: Vec<_> = [2, 3, 12, 30, 31].iter().map(|&n| record_with_shots(n)).collect();
        let kept: Vec<usize> = filter_shots(&records, 3, 30)
            .unwrap()
            .iter()
            .map(|r| r.shot_count())
            .collect();
        assert_eq!(kept, vec![3, 12, 30]);
        assert!(matches!(filter_shots(&records, 5, 4), Err(CorpusError::Argument(_))));
    }

    #[test]
    fn stats_all_primary() {
        let stats = corpus_stats(&[record_with_shots(4), record_with_shots(6)]).unwrap();
        assert_eq!(stats.n_records, 2);
        assert_eq!(stats.mean_shots, 5.0);
        assert_eq!(stats.mean_sentences, 2.0);
        assert_eq!(stats.act_proportions.len(), 1);
        assert_eq!(stats.act_proportions[&ActKind::PrimaryContext], 1.0);
        assert_eq!(stats.relation_proportions[&ParagraphRelation::Cause], 1.0);
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::Empty)));
    }

    #[test]
    fn stats_count_shared_shot_once_per_parent() {
        let mut r = record_with_shots(3);
        r.video_graph
            .acts
            .push(DiscourseAct::new("a1", ActKind::AuxiliaryContext));
        r.video_graph
            .edges
            .push(Edge::new("a1", "s2", VideoRelation::Interpretation));
        assert!(r.validate().is_ok());
        let stats = corpus_stats(&[r]).unwrap();
        assert_eq!(stats.act_proportions[&ActKind::PrimaryContext], 0.75);
        assert_eq!(stats.act_proportions[&ActKind::AuxiliaryContext], 0.25);
    }

    #[test]
    fn split_sizes_and_errors() {
        let records: Vec<_> = (0..310).map(|i| record_with_shots(3 + i % 5)).collect();
        let s = split(&records, 210, 30, 70, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (210, 30, 70));
        assert_eq!(s, split(&records, 210, 30, 70, 1).unwrap());
        assert!(matches!(
            split(&records, 300, 30, 70, 1),
            Err(CorpusError::Insufficient { needed: 400, available: 310 })
        ));
    }
}
