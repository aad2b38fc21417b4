use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{ActKind, ValidationReport, VideoRelation};

/// A contiguous recording of frames; the video-side EDU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub id: String,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_ref: Option<String>,
}

impl Shot {
    pub fn new(id: impl Into<String>, start_s: f64, end_s: f64) -> Self {
        Shot {
            id: id.into(),
            start_s,
            end_s,
            feature_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseAct {
    pub id: String,
    pub kind: ActKind,
}

impl DiscourseAct {
    pub fn new(id: impl Into<String>, kind: ActKind) -> Self {
        DiscourseAct {
            id: id.into(),
            kind,
        }
    }
}

/// Relation-labelled edge from a discourse act to a shot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub act: String,
    pub shot: String,
    pub rel: VideoRelation,
}

impl Edge {
    pub fn new(act: impl Into<String>, shot: impl Into<String>, rel: VideoRelation) -> Self {
        Edge {
            act: act.into(),
            shot: shot.into(),
            rel,
        }
    }
}

/// Rooted discourse DAG of a video.
///
/// The root is implicit: every act is a child of it, and root→act edges carry
/// no label. Acts are kept in annotation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoDiscourseGraph {
    pub acts: Vec<DiscourseAct>,
    pub shots: Vec<Shot>,
    pub edges: Vec<Edge>,
}

impl VideoDiscourseGraph {
    pub fn act(&self, id: &str) -> Option<&DiscourseAct> {
        self.acts.iter().find(|a| a.id == id)
    }

    /// Act kind of every edge, in edge order. Edges pointing at unknown acts
    /// are skipped.
    pub fn attachment_kinds(&self) -> Vec<ActKind> {
        let kinds: HashMap<&str, ActKind> =
            self.acts.iter().map(|a| (a.id.as_str(), a.kind)).collect();
        self.edges
            .iter()
            .filter_map(|e| kinds.get(e.act.as_str()).copied())
            .collect()
    }

    /// For each shot (in shot order), the first edge attaching it to an act.
    pub fn primary_attachment(&self, shot_id: &str) -> Option<(&DiscourseAct, VideoRelation)> {
        self.edges
            .iter()
            .filter(|e| e.shot == shot_id)
            .find_map(|e| self.act(&e.act).map(|a| (a, e.rel)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Node<'a> {
    Root,
    Named(&'a str),
}

impl Node<'_> {
    fn label(&self) -> String {
        match self {
            Node::Root => "P".to_string(),
            Node::Named(n) => (*n).to_string(),
        }
    }
}

/// Checks every structural invariant of a video discourse graph and reports
/// all violations with the offending node and edge identifiers.
pub fn validate_video_graph(g: &VideoDiscourseGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut acts: BTreeMap<&str, ActKind> = BTreeMap::new();
    let mut shots: BTreeSet<&str> = BTreeSet::new();
    for a in &g.acts {
        if acts.insert(a.id.as_str(), a.kind).is_some() {
            report.push("duplicate_id", format!("act id {:?} declared twice", a.id));
        }
    }
    for s in &g.shots {
        if !shots.insert(s.id.as_str()) {
            report.push("duplicate_id", format!("shot id {:?} declared twice", s.id));
        }
        if acts.contains_key(s.id.as_str()) {
            report.push(
                "duplicate_id",
                format!("id {:?} is used for both an act and a shot", s.id),
            );
        }
        if !(s.start_s.is_finite() && s.end_s.is_finite()) || s.start_s < 0.0 {
            report.push(
                "invalid_time",
                format!("shot {:?} has start {} end {}", s.id, s.start_s, s.end_s),
            );
        } else if s.end_s <= s.start_s {
            report.push(
                "invalid_time",
                format!("shot {:?} ends at {} before it starts at {}", s.id, s.end_s, s.start_s),
            );
        }
    }

    let mut seen_edges: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut interpretations: BTreeMap<&str, usize> = BTreeMap::new();
    let mut act_out: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, e) in g.edges.iter().enumerate() {
        if !acts.contains_key(e.act.as_str()) {
            let what = if shots.contains(e.act.as_str()) {
                "is a shot, not an act"
            } else {
                "is not declared"
            };
            report.push(
                "unknown_act",
                format!("edge {} ({} -> {}): source {:?} {}", i, e.act, e.shot, e.act, what),
            );
        }
        if !shots.contains(e.shot.as_str()) {
            let what = if acts.contains_key(e.shot.as_str()) {
                "is an act, not a shot"
            } else {
                "is not declared"
            };
            report.push(
                "unknown_shot",
                format!("edge {} ({} -> {}): target {:?} {}", i, e.act, e.shot, e.shot, what),
            );
        }
        if !seen_edges.insert((e.act.as_str(), e.shot.as_str())) {
            report.push(
                "duplicate_edge",
                format!("shot {:?} attached to act {:?} more than once", e.shot, e.act),
            );
        }
        *act_out.entry(e.act.as_str()).or_default() += 1;
        if e.rel == VideoRelation::Interpretation {
            let n = interpretations.entry(e.act.as_str()).or_default();
            *n += 1;
            if *n == 2 {
                report.push(
                    "duplicate_interpretation",
                    format!("act {:?} has more than one interpretation edge", e.act),
                );
            }
        }
    }
    for a in &g.acts {
        if !act_out.contains_key(a.id.as_str()) {
            report.push(
                "empty_act",
                format!("act {:?} has no shots and would be a non-shot leaf", a.id),
            );
        }
    }

    // Generic graph over every declared id, so malformed edges that chain
    // acts and shots still surface as cycles.
    let mut adj: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let declared: BTreeSet<&str> = acts.keys().copied().chain(shots.iter().copied()).collect();
    adj.insert(Node::Root, g.acts.iter().map(|a| Node::Named(&a.id)).collect());
    for id in &declared {
        adj.entry(Node::Named(id)).or_default();
    }
    for e in &g.edges {
        if declared.contains(e.act.as_str()) && declared.contains(e.shot.as_str()) {
            adj.entry(Node::Named(&e.act))
                .or_default()
                .push(Node::Named(&e.shot));
        }
    }

    if let Some(cycle) = find_cycle(&adj) {
        let path: Vec<String> = cycle.iter().map(Node::label).collect();
        report.push("cycle", format!("cycle through {}", path.join(" -> ")));
    }

    let mut indegree: BTreeMap<Node, usize> = adj.keys().map(|n| (*n, 0)).collect();
    for targets in adj.values() {
        for t in targets {
            *indegree.entry(*t).or_default() += 1;
        }
    }
    let extra_roots: Vec<String> = indegree
        .iter()
        .filter(|(n, d)| **d == 0 && **n != Node::Root)
        .map(|(n, _)| n.label())
        .collect();
    if !extra_roots.is_empty() {
        report.push(
            "multiple_roots",
            format!("nodes without a parent besides P: {}", extra_roots.join(", ")),
        );
    }

    let mut reached: BTreeSet<Node> = BTreeSet::new();
    let mut stack = vec![Node::Root];
    while let Some(n) = stack.pop() {
        if reached.insert(n) {
            if let Some(next) = adj.get(&n) {
                stack.extend(next.iter().copied());
            }
        }
    }
    for s in &g.shots {
        if !reached.contains(&Node::Named(&s.id)) {
            report.push("unreachable", format!("shot {:?} is not reachable from P", s.id));
        }
    }

    report
}

fn find_cycle<'a>(adj: &BTreeMap<Node<'a>, Vec<Node<'a>>>) -> Option<Vec<Node<'a>>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Open,
        Done,
    }
    let mut mark: BTreeMap<Node, Mark> = adj.keys().map(|n| (*n, Mark::Fresh)).collect();
    for &start in adj.keys() {
        if mark[&start] != Mark::Fresh {
            continue;
        }
        // (node, next child index)
        let mut path: Vec<(Node, usize)> = vec![(start, 0)];
        mark.insert(start, Mark::Open);
        while let Some(&mut (node, ref mut next)) = path.last_mut() {
            let children = adj.get(&node).map(Vec::as_slice).unwrap_or(&[]);
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                match mark.get(&child).copied().unwrap_or(Mark::Fresh) {
                    Mark::Open => {
                        let from = path.iter().position(|(n, _)| *n == child).unwrap_or(0);
                        let mut cycle: Vec<Node> = path[from..].iter().map(|(n, _)| *n).collect();
                        cycle.push(child);
                        return Some(cycle);
                    }
                    Mark::Fresh => {
                        mark.insert(child, Mark::Open);
                        path.push((child, 0));
                    }
                    Mark::Done => {}
                }
            } else {
                mark.insert(node, Mark::Done);
                path.pop();
            }
        }
    }
    None
}
