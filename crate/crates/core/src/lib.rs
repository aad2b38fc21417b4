//! Discourse structure of videos and their paragraph captions: representation,
//! parsing, evaluation, agreement and coherence scoring.

pub mod agreement;
pub mod coherence;
pub mod corpus;
pub mod features;
pub mod model;
pub mod parser;
pub mod parseval;
pub mod seq2seq;
pub mod synth;

pub use model::{
    ActKind, DiscourseAct, Edge, Nuclearity, ParagraphRelation, RstTree, Shot, Span,
    ValidationReport, VideoDiscourseGraph, VideoRelation,
};
