use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ModelError, Nuclearity, ParagraphRelation, ValidationReport};

/// Discourse tree over sentence EDUs.
///
/// Serialized as `{"edu": i}` for leaves and
/// `{"rel": .., "nuc": .., "children": [..]}` for internal nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RstTree {
    Leaf {
        edu: usize,
    },
    Node {
        #[serde(rename = "rel")]
        relation: ParagraphRelation,
        #[serde(rename = "nuc")]
        nuclearity: Nuclearity,
        children: Vec<RstTree>,
    },
}

/// Inclusive EDU interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One internal node of a binarized tree, seen as a relation between two
/// adjacent spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationLink {
    pub relation: ParagraphRelation,
    pub nuclearity: Nuclearity,
    pub left: Span,
    pub right: Span,
}

/// Nuclearity a relation receives unless annotated otherwise.
pub fn default_nuclearity(relation: ParagraphRelation) -> Nuclearity {
    if relation.is_multinuclear() {
        Nuclearity::MultiNuclear
    } else {
        Nuclearity::NucleusSatellite
    }
}

impl RstTree {
    pub fn leaf(edu: usize) -> Self {
        RstTree::Leaf { edu }
    }

    pub fn node(relation: ParagraphRelation, nuclearity: Nuclearity, children: Vec<RstTree>) -> Self {
        RstTree::Node {
            relation,
            nuclearity,
            children,
        }
    }

    /// Binary node with the relation's default nuclearity.
    pub fn join(relation: ParagraphRelation, left: RstTree, right: RstTree) -> Self {
        RstTree::node(relation, default_nuclearity(relation), vec![left, right])
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, RstTree::Leaf { .. })
    }

    /// Leaf EDU indices, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            RstTree::Leaf { edu } => out.push(*edu),
            RstTree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            RstTree::Leaf { .. } => 1,
            RstTree::Node { children, .. } => children.iter().map(RstTree::leaf_count).sum(),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            RstTree::Leaf { .. } => 0,
            RstTree::Node { children, .. } => {
                1 + children.iter().map(RstTree::internal_count).sum::<usize>()
            }
        }
    }

    pub fn first_edu(&self) -> usize {
        match self {
            RstTree::Leaf { edu } => *edu,
            RstTree::Node { children, .. } => children[0].first_edu(),
        }
    }

    pub fn last_edu(&self) -> usize {
        match self {
            RstTree::Leaf { edu } => *edu,
            RstTree::Node { children, .. } => children[children.len() - 1].last_edu(),
        }
    }

    /// Span covered by this subtree, assuming contiguous leaves.
    pub fn span(&self) -> Span {
        Span::new(self.first_edu(), self.last_edu())
    }

    pub fn relation(&self) -> Option<ParagraphRelation> {
        match self {
            RstTree::Leaf { .. } => None,
            RstTree::Node { relation, .. } => Some(*relation),
        }
    }

    pub fn nuclearity(&self) -> Option<Nuclearity> {
        match self {
            RstTree::Leaf { .. } => None,
            RstTree::Node { nuclearity, .. } => Some(*nuclearity),
        }
    }

    /// The EDU a relation on this subtree attaches to: follow nuclei down to
    /// a leaf, taking the first nucleus of multinuclear nodes.
    pub fn head_edu(&self) -> usize {
        match self {
            RstTree::Leaf { edu } => *edu,
            RstTree::Node {
                nuclearity,
                children,
                ..
            } => match nuclearity {
                Nuclearity::SatelliteNucleus => children[children.len() - 1].head_edu(),
                _ => children[0].head_edu(),
            },
        }
    }

    /// Relation kinds of all internal nodes in pre-order.
    pub fn relations_preorder(&self) -> Vec<ParagraphRelation> {
        let mut out = Vec::new();
        self.walk_preorder(&mut |t| {
            if let Some(r) = t.relation() {
                out.push(r);
            }
        });
        out
    }

    pub fn walk_preorder<'a>(&'a self, f: &mut impl FnMut(&'a RstTree)) {
        f(self);
        if let RstTree::Node { children, .. } = self {
            for c in children {
                c.walk_preorder(f);
            }
        }
    }

    /// Replaces internal-node relations in pre-order from `kinds`.
    pub(crate) fn with_relations_preorder(&self, kinds: &mut impl Iterator<Item = ParagraphRelation>) -> RstTree {
        match self {
            RstTree::Leaf { edu } => RstTree::Leaf { edu: *edu },
            RstTree::Node {
                relation,
                nuclearity,
                children,
            } => {
                let relation = kinds.next().unwrap_or(*relation);
                let children = children
                    .iter()
                    .map(|c| c.with_relations_preorder(kinds))
                    .collect();
                RstTree::Node {
                    relation,
                    nuclearity: *nuclearity,
                    children,
                }
            }
        }
    }
}

/// Checks that the leaves enumerate `0..n_edus` left to right exactly once
/// and that every internal node covers a contiguous span.
pub fn validate_rst_tree(t: &RstTree, n_edus: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    if n_edus == 0 {
        report.push("no_edus", "a tree needs at least one EDU");
    }
    check_nodes(t, &mut report);

    let leaves = t.leaves();
    let mut seen = BTreeSet::new();
    for &edu in &leaves {
        if edu >= n_edus {
            report.push("edu_out_of_range", format!("edu {} with only {} EDUs", edu, n_edus));
        } else if !seen.insert(edu) {
            report.push("duplicate_edu", format!("edu {} appears more than once", edu));
        }
    }
    let missing: Vec<String> = (0..n_edus)
        .filter(|i| !seen.contains(i))
        .map(|i| i.to_string())
        .collect();
    if !missing.is_empty() {
        report.push("missing_edu", format!("missing edu {}", missing.join(", ")));
    }
    let in_order = leaves.iter().enumerate().all(|(i, &e)| i == e);
    if missing.is_empty() && !in_order && !report.has("duplicate_edu") {
        report.push(
            "non_contiguous",
            format!("leaves read {:?} instead of 0..{}", leaves, n_edus),
        );
    }
    report
}

fn check_nodes(t: &RstTree, report: &mut ValidationReport) {
    if let RstTree::Node {
        relation, children, ..
    } = t
    {
        if children.len() < 2 {
            report.push(
                "unary_node",
                format!("{} node has {} child(ren), needs at least 2", relation, children.len()),
            );
        }
        for pair in children.windows(2) {
            let (a, b) = (pair[0].last_edu(), pair[1].first_edu());
            if a.checked_add(1) != Some(b) {
                report.push(
                    "non_contiguous",
                    format!("{} node joins spans ending at {} and starting at {}", relation, a, b),
                );
            }
        }
        for c in children {
            check_nodes(c, report);
        }
    }
}

fn ensure_valid(t: &RstTree) -> Result<(), ModelError> {
    let report = validate_rst_tree(t, t.leaf_count());
    if report.is_ok() {
        Ok(())
    } else {
        Err(ModelError::InvalidTree(report))
    }
}

/// Right-branching binarization: a k-ary node becomes a chain of binary nodes
/// that repeat its relation and nuclearity.
pub fn binarize(t: &RstTree) -> Result<RstTree, ModelError> {
    ensure_valid(t)?;
    Ok(binarize_unchecked(t))
}

pub(crate) fn binarize_unchecked(t: &RstTree) -> RstTree {
    match t {
        RstTree::Leaf { edu } => RstTree::Leaf { edu: *edu },
        RstTree::Node {
            relation,
            nuclearity,
            children,
        } => chain(*relation, *nuclearity, children),
    }
}

fn chain(relation: ParagraphRelation, nuclearity: Nuclearity, children: &[RstTree]) -> RstTree {
    match children {
        [] => unreachable!("validated nodes have children"),
        [only] => binarize_unchecked(only),
        [first, rest @ ..] => RstTree::Node {
            relation,
            nuclearity,
            children: vec![binarize_unchecked(first), chain(relation, nuclearity, rest)],
        },
    }
}

/// Internal nodes of the binarized tree ordered by span start, shorter spans
/// first on ties.
pub fn relation_sequence(t: &RstTree) -> Result<Vec<RelationLink>, ModelError> {
    let bin = binarize(t)?;
    Ok(relation_links(&bin))
}

pub(crate) fn relation_links(bin: &RstTree) -> Vec<RelationLink> {
    let mut links = Vec::new();
    bin.walk_preorder(&mut |node| {
        if let RstTree::Node {
            relation,
            nuclearity,
            children,
        } = node
        {
            links.push(RelationLink {
                relation: *relation,
                nuclearity: *nuclearity,
                left: children[0].span(),
                right: children[1].span(),
            });
        }
    });
    links.sort_by_key(|l| (l.left.start, l.right.end - l.left.start));
    links
}

/// Right-branching tree over `relations.len() + 1` EDUs whose relation
/// sequence is `relations`, with default nuclearity.
pub fn right_branching(relations: &[ParagraphRelation]) -> RstTree {
    let n = relations.len();
    let mut tree = RstTree::leaf(n);
    for (i, &rel) in relations.iter().enumerate().rev() {
        tree = RstTree::join(rel, RstTree::leaf(i), tree);
    }
    tree
}
