use crate::model::RstTree;

use super::state::ParserState;

/// Bumped whenever the template set changes; stored in model files.
pub const TEMPLATE_VERSION: u32 = 1;

/// Lowercased whitespace tokens with surrounding punctuation trimmed.
pub fn tokens(sentence: &str) -> Vec<String> {
    sentence
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn lead(sentence: &str) -> [String; 2] {
    let toks = tokens(sentence);
    let get = |i: usize| toks.get(i).cloned().unwrap_or_else(|| "<none>".to_string());
    [get(0), get(1)]
}

fn bucket(n: usize, cap: usize) -> String {
    if n >= cap {
        format!("{}+", cap)
    } else {
        n.to_string()
    }
}

fn subtree_features(prefix: &str, t: &RstTree, sentences: &[String]) -> Vec<String> {
    let (rel, nuc) = match t {
        RstTree::Leaf { .. } => ("leaf".to_string(), "leaf".to_string()),
        RstTree::Node {
            relation,
            nuclearity,
            ..
        } => (relation.name().to_string(), nuclearity.code().to_string()),
    };
    let span = t.span();
    let [f0, f1] = lead(&sentences[span.start]);
    let [l0, l1] = lead(&sentences[span.end]);
    vec![
        format!("{}_rel={}", prefix, rel),
        format!("{}_nuc={}", prefix, nuc),
        format!("{}_len={}", prefix, bucket(span.len(), 4)),
        format!("{}_fe_t0={}", prefix, f0),
        format!("{}_fe_t1={}", prefix, f1),
        format!("{}_le_t0={}", prefix, l0),
        format!("{}_le_t1={}", prefix, l1),
    ]
}

/// Sparse binary features of a parser state, sorted and deduplicated.
pub fn extract_features(state: &ParserState<'_>) -> Vec<String> {
    let sentences = state.sentences();
    let stack = state.stack();
    let mut out = vec![
        "bias".to_string(),
        format!("stack_h={}", bucket(stack.len(), 3)),
        format!("q_len={}", bucket(state.queue_len(), 4)),
    ];

    let queue = state.queue();
    if queue.is_empty() {
        out.push("q0=none".to_string());
    } else {
        let [t0, t1] = lead(&sentences[queue.start]);
        out.push(format!("q0_tok={}", t0));
        out.push(format!("q0_tok1={}", t1));
    }

    let s0 = stack.last().map(|t| subtree_features("s0", t, sentences));
    let s1 = stack
        .len()
        .checked_sub(2)
        .map(|i| subtree_features("s1", &stack[i], sentences));
    match (&s0, &s1) {
        (Some(a), Some(b)) => {
            out.extend(a.iter().cloned());
            out.extend(b.iter().cloned());
            for x in a {
                for y in b {
                    out.push(format!("{}&{}", x, y));
                }
            }
        }
        (Some(a), None) => {
            out.extend(a.iter().cloned());
            out.push("s1=none".to_string());
        }
        _ => out.push("s0=none".to_string()),
    }
    out.sort();
    out.dedup();
    out
}
