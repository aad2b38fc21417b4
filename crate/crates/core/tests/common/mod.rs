#![allow(dead_code)]

pub mod alpha;

use discoh::{Nuclearity, ParagraphRelation, RstTree};
use rand::Rng;

pub fn random_label(rng: &mut impl Rng) -> (ParagraphRelation, Nuclearity) {
    let rel = ParagraphRelation::ALL[rng.gen_range(0..ParagraphRelation::COUNT)];
    let nuc = if rel.is_multinuclear() {
        Nuclearity::MultiNuclear
    } else if rng.gen_bool(0.5) {
        Nuclearity::NucleusSatellite
    } else {
        Nuclearity::SatelliteNucleus
    };
    (rel, nuc)
}

/// Random tree over EDUs `lo..=hi`; nodes with three or more EDUs are
/// sometimes ternary when `nary` is set.
pub fn random_tree_over(rng: &mut impl Rng, lo: usize, hi: usize, nary: bool) -> RstTree {
    if lo == hi {
        return RstTree::leaf(lo);
    }
    let n = hi - lo + 1;
    let arity = if nary && n >= 3 && rng.gen_bool(0.25) { 3 } else { 2 };
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < arity - 1 {
        let c = rng.gen_range(lo..hi);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort();
    let mut children = Vec::new();
    let mut start = lo;
    for c in cuts {
        children.push(random_tree_over(rng, start, c, nary));
        start = c + 1;
    }
    children.push(random_tree_over(rng, start, hi, nary));
    let (rel, nuc) = random_label(rng);
    RstTree::node(rel, nuc, children)
}

pub fn random_tree(rng: &mut impl Rng, n_leaves: usize, nary: bool) -> RstTree {
    random_tree_over(rng, 0, n_leaves - 1, nary)
}

/// Every binary tree shape over EDUs `lo..=hi`, all internal nodes labelled
/// `(Elaboration, NS)`.
pub fn all_binary_shapes(lo: usize, hi: usize) -> Vec<RstTree> {
    if lo == hi {
        return vec![RstTree::leaf(lo)];
    }
    let mut out = Vec::new();
    for cut in lo..hi {
        for l in all_binary_shapes(lo, cut) {
            for r in all_binary_shapes(cut + 1, hi) {
                out.push(RstTree::node(
                    ParagraphRelation::Elaboration,
                    Nuclearity::NucleusSatellite,
                    vec![l.clone(), r],
                ));
            }
        }
    }
    out
}

/// Relabels internal nodes in pre-order with random labels.
pub fn relabel(t: &RstTree, rng: &mut impl Rng) -> RstTree {
    match t {
        RstTree::Leaf { edu } => RstTree::leaf(*edu),
        RstTree::Node { children, .. } => {
            let (rel, nuc) = random_label(rng);
            RstTree::node(rel, nuc, children.iter().map(|c| relabel(c, rng)).collect())
        }
    }
}

pub fn sentences(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("sentence number {}", i)).collect()
}
