//! Discourse taxonomy and structural types for videos and paragraphs.
//!
//! Videos are represented as a rooted DAG whose interior nodes are discourse
//! acts and whose leaves are shots; paragraphs are represented as RST-style
//! trees over sentence EDUs.

mod rst;
mod video;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use rst::{
    binarize, default_nuclearity, relation_sequence, right_branching, validate_rst_tree,
    RelationLink, RstTree, Span,
};
pub use video::{validate_video_graph, DiscourseAct, Edge, Shot, VideoDiscourseGraph};

/// Role category of a video shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActKind {
    #[serde(rename = "primary")]
    PrimaryContext,
    #[serde(rename = "secondary")]
    SecondaryContext,
    #[serde(rename = "auxiliary")]
    AuxiliaryContext,
}

impl ActKind {
    pub const ALL: [ActKind; 3] = [
        ActKind::PrimaryContext,
        ActKind::SecondaryContext,
        ActKind::AuxiliaryContext,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ActKind::PrimaryContext => "primary",
            ActKind::SecondaryContext => "secondary",
            ActKind::AuxiliaryContext => "auxiliary",
        }
    }
}

/// Label on an act→shot edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoRelation {
    Interpretation,
    Sequence,
    SubContext,
    SuperContext,
    Elaboration,
    Repetition,
}

impl VideoRelation {
    pub const ALL: [VideoRelation; 6] = [
        VideoRelation::Interpretation,
        VideoRelation::Sequence,
        VideoRelation::SubContext,
        VideoRelation::SuperContext,
        VideoRelation::Elaboration,
        VideoRelation::Repetition,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            VideoRelation::Interpretation => "interpretation",
            VideoRelation::Sequence => "sequence",
            VideoRelation::SubContext => "sub_context",
            VideoRelation::SuperContext => "super_context",
            VideoRelation::Elaboration => "elaboration",
            VideoRelation::Repetition => "repetition",
        }
    }
}

/// Relation between sentence spans in a video paragraph.
///
/// Variant order is the fixed enumeration order used for tie-breaking in the
/// parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParagraphRelation {
    Background,
    Continuation,
    Parallel,
    Elaboration,
    Cause,
    VideoAttribute,
    Sequence,
    Interpretation,
    Sentiment,
    Expectation,
}

impl ParagraphRelation {
    pub const COUNT: usize = 10;

    pub const ALL: [ParagraphRelation; 10] = [
        ParagraphRelation::Background,
        ParagraphRelation::Continuation,
        ParagraphRelation::Parallel,
        ParagraphRelation::Elaboration,
        ParagraphRelation::Cause,
        ParagraphRelation::VideoAttribute,
        ParagraphRelation::Sequence,
        ParagraphRelation::Interpretation,
        ParagraphRelation::Sentiment,
        ParagraphRelation::Expectation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Sequence, Parallel and Continuation join coordinate spans.
    pub fn is_multinuclear(self) -> bool {
        matches!(
            self,
            ParagraphRelation::Sequence
                | ParagraphRelation::Parallel
                | ParagraphRelation::Continuation
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ParagraphRelation::Background => "background",
            ParagraphRelation::Continuation => "continuation",
            ParagraphRelation::Parallel => "parallel",
            ParagraphRelation::Elaboration => "elaboration",
            ParagraphRelation::Cause => "cause",
            ParagraphRelation::VideoAttribute => "video_attribute",
            ParagraphRelation::Sequence => "sequence",
            ParagraphRelation::Interpretation => "interpretation",
            ParagraphRelation::Sentiment => "sentiment",
            ParagraphRelation::Expectation => "expectation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.name() == name)
    }
}

impl fmt::Display for ParagraphRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Nuclearity {
    #[serde(rename = "NS")]
    NucleusSatellite,
    #[serde(rename = "SN")]
    SatelliteNucleus,
    #[serde(rename = "NN")]
    MultiNuclear,
}

impl Nuclearity {
    pub const ALL: [Nuclearity; 3] = [
        Nuclearity::NucleusSatellite,
        Nuclearity::SatelliteNucleus,
        Nuclearity::MultiNuclear,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Nuclearity::NucleusSatellite => "NS",
            Nuclearity::SatelliteNucleus => "SN",
            Nuclearity::MultiNuclear => "NN",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|n| n.code() == code)
    }
}

impl fmt::Display for Nuclearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// A single violated structural invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: &'static str,
    pub detail: String,
}

impl Violation {
    pub(crate) fn new(code: &'static str, detail: impl Into<String>) -> Self {
        Violation {
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

/// Outcome of structural validation. Violations are data, not failures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub(crate) fn push(&mut self, code: &'static str, detail: impl Into<String>) {
        self.violations.push(Violation::new(code, detail));
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}", v)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid tree: {0}")]
    InvalidTree(ValidationReport),
}
