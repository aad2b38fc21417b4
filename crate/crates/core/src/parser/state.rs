use std::fmt;

use crate::model::{binarize, ModelError, Nuclearity, ParagraphRelation, RstTree};

/// Number of distinct actions: Shift plus one Reduce per (relation, nuclearity).
pub const N_ACTIONS: usize = 1 + ParagraphRelation::COUNT * 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Shift,
    Reduce {
        nuclearity: Nuclearity,
        relation: ParagraphRelation,
    },
}

impl Action {
    pub fn reduce(nuclearity: Nuclearity, relation: ParagraphRelation) -> Self {
        Action::Reduce {
            nuclearity,
            relation,
        }
    }

    /// Dense index in `0..N_ACTIONS`.
    pub fn index(self) -> usize {
        match self {
            Action::Shift => 0,
            Action::Reduce {
                nuclearity,
                relation,
            } => 1 + relation.index() * 3 + nuclearity as usize,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        if i == 0 {
            return Some(Action::Shift);
        }
        let k = i.checked_sub(1)?;
        let relation = ParagraphRelation::from_index(k / 3)?;
        let nuclearity = Nuclearity::ALL[k % 3];
        Some(Action::reduce(nuclearity, relation))
    }

    /// Stable textual name, e.g. `shift` or `reduce-NS-cause`.
    pub fn name(self) -> String {
        match self {
            Action::Shift => "shift".to_string(),
            Action::Reduce {
                nuclearity,
                relation,
            } => format!("reduce-{}-{}", nuclearity.code(), relation.name()),
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        if name == "shift" {
            return Some(Action::Shift);
        }
        let rest = name.strip_prefix("reduce-")?;
        let (nuc, rel) = rest.split_once('-')?;
        Some(Action::reduce(
            Nuclearity::from_code(nuc)?,
            ParagraphRelation::from_name(rel)?,
        ))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Reduce actions the decoder considers, in tie-break order: relations in
/// enumeration order, NS before SN; multinuclear relations only as NN.
pub fn canonical_reduces() -> Vec<Action> {
    let mut out = Vec::with_capacity(18);
    for rel in ParagraphRelation::ALL {
        if rel.is_multinuclear() {
            out.push(Action::reduce(Nuclearity::MultiNuclear, rel));
        } else {
            out.push(Action::reduce(Nuclearity::NucleusSatellite, rel));
            out.push(Action::reduce(Nuclearity::SatelliteNucleus, rel));
        }
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParserError {
    #[error("illegal {action}: {reason}")]
    IllegalAction { action: Action, reason: &'static str },
    #[error("cannot parse an empty paragraph")]
    NoSentences,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("margin must be finite and non-negative, got {0}")]
    BadMargin(f64),
    #[error("example {index}: tree has {leaves} EDUs but {sentences} sentences")]
    SentenceMismatch {
        index: usize,
        leaves: usize,
        sentences: usize,
    },
    #[error("invalid gold tree: {0}")]
    Tree(String),
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}

impl From<ModelError> for ParserError {
    fn from(e: ModelError) -> Self {
        ParserError::Tree(e.to_string())
    }
}

/// Shift-reduce configuration: a stack of finished subtrees and the queue of
/// EDUs not yet shifted. The queue is always a suffix `next..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserState<'a> {
    sentences: &'a [String],
    stack: Vec<RstTree>,
    next: usize,
    step: usize,
}

impl<'a> ParserState<'a> {
    /// All EDUs queued, empty stack.
    pub fn initial(sentences: &'a [String]) -> Self {
        ParserState {
            sentences,
            stack: Vec::new(),
            next: 0,
            step: 0,
        }
    }

    pub fn sentences(&self) -> &'a [String] {
        self.sentences
    }

    pub fn stack(&self) -> &[RstTree] {
        &self.stack
    }

    /// Remaining EDU indices.
    pub fn queue(&self) -> std::ops::Range<usize> {
        self.next..self.sentences.len()
    }

    pub fn queue_len(&self) -> usize {
        self.sentences.len() - self.next
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_terminal(&self) -> bool {
        self.queue_len() == 0 && self.stack.len() <= 1
    }

    /// Actions the decoder may choose from; empty iff terminal.
    pub fn legal_actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        if self.queue_len() > 0 {
            out.push(Action::Shift);
        }
        if self.stack.len() >= 2 {
            out.extend(canonical_reduces());
        }
        out
    }

    pub fn apply(&self, action: Action) -> Result<ParserState<'a>, ParserError> {
        let mut next = self.clone();
        next.apply_mut(action)?;
        Ok(next)
    }

    /// In-place transition. Any Reduce is accepted structurally so that
    /// oracle sequences of arbitrary gold trees replay.
    pub fn apply_mut(&mut self, action: Action) -> Result<(), ParserError> {
        match action {
            Action::Shift => {
                if self.queue_len() == 0 {
                    return Err(ParserError::IllegalAction {
                        action,
                        reason: "shift needs a non-empty queue",
                    });
                }
                self.stack.push(RstTree::leaf(self.next));
                self.next += 1;
            }
            Action::Reduce {
                nuclearity,
                relation,
            } => {
                if self.stack.len() < 2 {
                    return Err(ParserError::IllegalAction {
                        action,
                        reason: "reduce needs at least two subtrees on the stack",
                    });
                }
                let right = self.stack.pop().expect("checked height");
                let left = self.stack.pop().expect("checked height");
                self.stack
                    .push(RstTree::node(relation, nuclearity, vec![left, right]));
            }
        }
        self.step += 1;
        Ok(())
    }

    /// The finished tree of a terminal state.
    pub fn result(&self) -> Option<&RstTree> {
        if self.queue_len() == 0 && self.stack.len() == 1 {
            self.stack.last()
        } else {
            None
        }
    }
}

/// Post-order linearization of the binarized gold tree.
pub fn oracle_actions(gold: &RstTree) -> Result<Vec<Action>, ModelError> {
    let bin = binarize(gold)?;
    let mut out = Vec::with_capacity(2 * bin.leaf_count());
    push_oracle(&bin, &mut out);
    Ok(out)
}

fn push_oracle(t: &RstTree, out: &mut Vec<Action>) {
    match t {
        RstTree::Leaf { .. } => out.push(Action::Shift),
        RstTree::Node {
            relation,
            nuclearity,
            children,
        } => {
            for c in children {
                push_oracle(c, out);
            }
            out.push(Action::reduce(*nuclearity, *relation));
        }
    }
}
