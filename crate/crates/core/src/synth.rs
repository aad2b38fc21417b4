//! Synthetic video/paragraph corpora with known generating distributions.
//!
//! Each record draws a shot count, an act kind per shot, one act per kind
//! present, and a video relation per edge (the first shot of each act is its
//! Interpretation). Shot features are frames around an act-specific mean.
//! The caption is a right-branching tree whose relation chain is sampled from
//! a bigram grammar; sentence `i + 1` opens with a cue for relation `i`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::corpus::{CorpusRecord, DEFAULT_MAX_SHOTS, DEFAULT_MIN_SHOTS};
use crate::features::FeatureSeq;
use crate::model::{
    right_branching, ActKind, DiscourseAct, Edge, ParagraphRelation, Shot,
    VideoDiscourseGraph, VideoRelation,
};

const N_REL: usize = ParagraphRelation::COUNT;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// First-relation distribution and relation-to-relation transitions, indexed
/// by `ParagraphRelation::index`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationGrammar {
    pub initial: [f64; N_REL],
    pub transitions: [[f64; N_REL]; N_REL],
}

impl RelationGrammar {
    /// A staged grammar: framing relations open a paragraph, narrative
    /// relations follow, then explanatory ones, then evaluative ones. Moving
    /// back to an earlier stage is rare.
    pub fn coherent() -> Self {
        use ParagraphRelation::*;
        let row = |pairs: &[(ParagraphRelation, f64)]| {
            let mut r = [0.0; N_REL];
            for &(rel, p) in pairs {
                r[rel.index()] = p;
            }
            r
        };
        let mut transitions = [[0.0; N_REL]; N_REL];
        let mut set = |from: ParagraphRelation, pairs: &[(ParagraphRelation, f64)]| {
            transitions[from.index()] = row(pairs);
        };
        set(Background, &[(Interpretation, 0.6), (Sequence, 0.3), (Parallel, 0.1)]);
        set(Interpretation, &[(Sequence, 0.55), (Parallel, 0.25), (Elaboration, 0.2)]);
        set(Sequence, &[(Cause, 0.4), (Continuation, 0.3), (Sequence, 0.2), (Sentiment, 0.1)]);
        set(Parallel, &[(Continuation, 0.5), (Parallel, 0.2), (Expectation, 0.2), (Elaboration, 0.1)]);
        set(Continuation, &[(Elaboration, 0.4), (Cause, 0.3), (VideoAttribute, 0.3)]);
        set(Elaboration, &[(Cause, 0.4), (Sentiment, 0.3), (VideoAttribute, 0.3)]);
        set(Cause, &[(Sentiment, 0.5), (Expectation, 0.3), (VideoAttribute, 0.2)]);
        set(VideoAttribute, &[(Sentiment, 0.6), (Expectation, 0.4)]);
        set(Sentiment, &[(Expectation, 0.6), (VideoAttribute, 0.4)]);
        set(Expectation, &[(Sentiment, 0.6), (VideoAttribute, 0.4)]);
        RelationGrammar {
            initial: row(&[(Interpretation, 0.45), (Background, 0.2), (Sequence, 0.2), (Parallel, 0.15)]),
            transitions,
        }
    }

    /// Every relation equally likely everywhere.
    pub fn uniform() -> Self {
        let u = 1.0 / N_REL as f64;
        RelationGrammar {
            initial: [u; N_REL],
            transitions: [[u; N_REL]; N_REL],
        }
    }

    pub fn sample_chain(&self, len: usize, rng: &mut impl Rng) -> Vec<ParagraphRelation> {
        let mut out = Vec::with_capacity(len);
        let mut row = &self.initial;
        for _ in 0..len {
            let i = WeightedIndex::new(row.iter().copied())
                .expect("validated grammar row")
                .sample(rng);
            out.push(ParagraphRelation::ALL[i]);
            row = &self.transitions[i];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    pub n_records: usize,
    /// Inclusive shot-count range.
    pub shots_range: (usize, usize),
    /// Inclusive sentence-count range.
    pub sentence_range: (usize, usize),
    /// Primary / secondary / auxiliary proportions, drawn per shot.
    pub act_mixture: [f64; 3],
    /// Relation weights for every edge except each act's first, which is
    /// always Interpretation. The Interpretation entry is ignored.
    pub video_relation_mixture: [f64; 6],
    pub grammar: RelationGrammar,
    /// Chance that a sentence opens with its incoming relation's cue.
    pub cue_prob: f64,
    pub feature_dim: usize,
    /// Per-frame Gaussian noise around the act mean.
    pub feature_noise: f64,
    /// Inclusive frames-per-shot range.
    pub frames_range: (usize, usize),
    /// Seeds the act means. Held fixed across corpora so that models trained
    /// on one seed transfer to another.
    pub feature_seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_records: 100,
            shots_range: (DEFAULT_MIN_SHOTS, DEFAULT_MAX_SHOTS),
            sentence_range: (2, 6),
            act_mixture: [0.67, 0.14, 0.19],
            video_relation_mixture: [0.0, 0.35, 0.2, 0.1, 0.25, 0.1],
            grammar: RelationGrammar::coherent(),
            cue_prob: 0.8,
            feature_dim: 16,
            feature_noise: 0.5,
            frames_range: (1, 4),
            feature_seed: 0x5EED_F00D,
        }
    }
}

fn check_mixture(name: &str, w: &[f64]) -> Result<(), SynthError> {
    let bad = || SynthError::InvalidConfig(format!("{} must be non-negative and sum to 1", name));
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(bad());
    }
    if (w.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(bad());
    }
    Ok(())
}

fn check_range(name: &str, r: (usize, usize), lo: usize, hi: usize) -> Result<(), SynthError> {
    if r.0 > r.1 || r.0 < lo || r.1 > hi {
        return Err(SynthError::InvalidConfig(format!(
            "{} [{}, {}] must be ordered and within [{}, {}]",
            name, r.0, r.1, lo, hi
        )));
    }
    Ok(())
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_range("shots_range", self.shots_range, DEFAULT_MIN_SHOTS, DEFAULT_MAX_SHOTS)?;
        check_range("sentence_range", self.sentence_range, 1, 64)?;
        check_range("frames_range", self.frames_range, 1, 1024)?;
        check_mixture("act_mixture", &self.act_mixture)?;
        let mut vr = self.video_relation_mixture;
        vr[VideoRelation::Interpretation.index()] = 0.0;
        let rest: f64 = vr.iter().sum();
        if rest <= 0.0 {
            return Err(SynthError::InvalidConfig(
                "video_relation_mixture needs weight outside Interpretation".into(),
            ));
        }
        check_mixture("video_relation_mixture", &self.video_relation_mixture)?;
        check_mixture("grammar.initial", &self.grammar.initial)?;
        for (i, row) in self.grammar.transitions.iter().enumerate() {
            check_mixture(
                &format!("grammar row {}", ParagraphRelation::ALL[i]),
                row,
            )?;
        }
        if !(0.0..=1.0).contains(&self.cue_prob) {
            return Err(SynthError::InvalidConfig("cue_prob must lie in [0, 1]".into()));
        }
        if self.feature_dim == 0 {
            return Err(SynthError::InvalidConfig("feature_dim must be positive".into()));
        }
        if !(self.feature_noise.is_finite() && self.feature_noise >= 0.0) {
            return Err(SynthError::InvalidConfig("feature_noise must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Mean feature vector of each act kind.
    pub fn act_means(&self) -> [Vec<f64>; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.feature_seed);
        let mut draw = || {
            (0..self.feature_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<f64>>()
        };
        [draw(), draw(), draw()]
    }
}

/// A generated record with the labels and features that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub record: CorpusRecord,
    pub features: FeatureSeq,
    /// Act kind of each shot, in shot order.
    pub act_labels: Vec<ActKind>,
    /// Video relation of each shot's edge, in shot order.
    pub relation_labels: Vec<VideoRelation>,
}

const SUBJECTS: [&str; 8] = [
    "a man", "a woman", "the boy", "the girl", "two people", "the player", "a dog", "the crowd",
];
const VERBS: [&str; 8] = [
    "walks to", "looks at", "holds", "throws", "picks up", "points at", "runs past", "cleans",
];
const OBJECTS: [&str; 8] = [
    "the ball", "a guitar", "the table", "a car", "the door", "a bike", "the stage", "the water",
];

/// Sentence-opening cue words per relation. Relations whose sentences are
/// about the video itself or the narrator's stance replace the whole clause.
fn cue(rel: ParagraphRelation, rng: &mut impl Rng) -> Cue {
    use ParagraphRelation::*;
    let pick = |opts: &'static [&'static str], rng: &mut dyn rand::RngCore| opts[rng.gen_range(0..opts.len())];
    match rel {
        Background => Cue::Prefix(pick(&["earlier,", "before that,"], rng)),
        Continuation => Cue::Prefix(pick(&["also,", "still,"], rng)),
        Parallel => Cue::Prefix(pick(&["meanwhile,", "at the same time,"], rng)),
        Elaboration => Cue::Prefix(pick(&["specifically,", "in detail,"], rng)),
        Cause => Cue::Prefix(pick(&["so", "as a result,"], rng)),
        Sequence => Cue::Prefix(pick(&["then", "next,"], rng)),
        Interpretation => Cue::Prefix(pick(&["apparently,", "it seems"], rng)),
        VideoAttribute => Cue::Whole(pick(&["the video is blurry.", "the camera shakes."], rng)),
        Sentiment => Cue::Whole(pick(&["the scene looks sad.", "it looks like fun."], rng)),
        Expectation => Cue::Whole(pick(&["there is no chair.", "nobody is there."], rng)),
    }
}

enum Cue {
    Prefix(&'static str),
    Whole(&'static str),
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn clause(rng: &mut impl Rng) -> String {
    format!(
        "{} {} {}",
        SUBJECTS[rng.gen_range(0..SUBJECTS.len())],
        VERBS[rng.gen_range(0..VERBS.len())],
        OBJECTS[rng.gen_range(0..OBJECTS.len())]
    )
}

fn sentence(incoming: Option<ParagraphRelation>, cue_prob: f64, rng: &mut impl Rng) -> String {
    let body = clause(rng);
    let text = match incoming {
        Some(rel) if rng.gen_bool(cue_prob) => match cue(rel, rng) {
            Cue::Prefix(p) => format!("{} {}.", p, body),
            Cue::Whole(w) => w.to_string(),
        },
        _ => format!("{}.", body),
    };
    capitalize(&text)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn generate_one(cfg: &GenConfig, index: usize, means: &[Vec<f64>; 3]) -> SynthRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let video_id = format!("synth-{:05}", index);

    let n_shots = rng.gen_range(cfg.shots_range.0..=cfg.shots_range.1);
    let act_dist = WeightedIndex::new(cfg.act_mixture).expect("validated mixture");
    let act_labels: Vec<ActKind> = (0..n_shots).map(|_| ActKind::ALL[act_dist.sample(&mut rng)]).collect();

    let mut vr = cfg.video_relation_mixture;
    vr[VideoRelation::Interpretation.index()] = 0.0;
    let rel_dist = WeightedIndex::new(vr).expect("validated mixture");

    let mut acts: Vec<DiscourseAct> = Vec::new();
    let mut shots = Vec::with_capacity(n_shots);
    let mut edges = Vec::with_capacity(n_shots);
    let mut relation_labels = Vec::with_capacity(n_shots);
    let mut t = 0.0;
    for (i, &kind) in act_labels.iter().enumerate() {
        let end = round2(t + rng.gen_range(1.0..6.0));
        let shot_id = format!("s{}", i);
        shots.push(Shot::new(shot_id.clone(), t, end));
        t = end;
        let act_id = match acts.iter().find(|a| a.kind == kind) {
            Some(a) => {
                let rel = VideoRelation::ALL[rel_dist.sample(&mut rng)];
                relation_labels.push(rel);
                a.id.clone()
            }
            None => {
                let id = format!("a{}", acts.len());
                acts.push(DiscourseAct::new(id.clone(), kind));
                relation_labels.push(VideoRelation::Interpretation);
                id
            }
        };
        edges.push(Edge::new(act_id, shot_id, *relation_labels.last().expect("pushed")));
    }

    let mut frames = Vec::new();
    let mut bounds = Vec::with_capacity(n_shots);
    for &kind in &act_labels {
        bounds.push(frames.len());
        let n_frames = rng.gen_range(cfg.frames_range.0..=cfg.frames_range.1);
        for _ in 0..n_frames {
            let f: Vec<f64> = means[kind.index()]
                .iter()
                .map(|m| m + cfg.feature_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            frames.push(f);
        }
    }
    let features = FeatureSeq::new(frames, bounds).expect("generator builds valid feature sequences");

    let n_sent = rng.gen_range(cfg.sentence_range.0..=cfg.sentence_range.1);
    let chain = cfg.grammar.sample_chain(n_sent - 1, &mut rng);
    let sentences = (0..n_sent)
        .map(|i| sentence(i.checked_sub(1).map(|j| chain[j]), cfg.cue_prob, &mut rng))
        .collect();

    SynthRecord {
        record: CorpusRecord {
            video_id,
            annotator_id: None,
            video_graph: VideoDiscourseGraph { acts, shots, edges },
            sentences,
            paragraph_tree: right_branching(&chain),
        },
        features,
        act_labels,
        relation_labels,
    }
}

/// Generates `cfg.n_records` records. Record `i` depends only on
/// `(cfg, i)`, so output is identical however the work is scheduled.
pub fn generate(cfg: &GenConfig) -> Result<Vec<SynthRecord>, SynthError> {
    cfg.validate()?;
    let means = cfg.act_means();
    Ok((0..cfg.n_records)
        .into_par_iter()
        .map(|i| generate_one(cfg, i, &means))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shuffled {
    pub record: CorpusRecord,
    /// Set when no differing permutation exists: fewer than two internal
    /// nodes, or every internal node carries the same relation.
    pub unchanged: bool,
}

/// Permutes relation kinds across the tree's internal nodes, keeping shape
/// and nuclearity. The result differs from the input whenever it can.
pub fn shuffle_relations(record: &CorpusRecord, seed: u64) -> Shuffled {
    let tree = &record.paragraph_tree;
    let kinds = tree.relations_preorder();
    let all_same = kinds.windows(2).all(|w| w[0] == w[1]);
    if kinds.len() < 2 || all_same {
        return Shuffled {
            record: record.clone(),
            unchanged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm = kinds.clone();
    while perm == kinds {
        perm.shuffle(&mut rng);
    }
    let mut out = record.clone();
    out.paragraph_tree = tree.with_relations_preorder(&mut perm.into_iter());
    Shuffled {
        record: out,
        unchanged: false,
    }
}
