//! Greedy shift-reduce discourse parser for paragraph trees, with a linear
//! action classifier trained by cost-augmented averaged perceptron.

mod features;
mod state;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;
use crate::model::RstTree;

pub use features::{extract_features, tokens, TEMPLATE_VERSION};
pub use state::{canonical_reduces, oracle_actions, Action, ParserError, ParserState, N_ACTIONS};

/// A paragraph and its gold tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ParagraphExample {
    pub sentences: Vec<String>,
    pub tree: RstTree,
}

impl From<&CorpusRecord> for ParagraphExample {
    fn from(r: &CorpusRecord) -> Self {
        ParagraphExample {
            sentences: r.sentences.clone(),
            tree: r.paragraph_tree.clone(),
        }
    }
}

/// Sparse linear scorer: `score(state, a) = Σ_f weights[f][a]`.
///
/// `weights` holds the averaged perceptron weights used for decoding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearMarginModel {
    pub margin: f64,
    pub weights: HashMap<String, [f64; N_ACTIONS]>,
}

impl LinearMarginModel {
    pub fn score(&self, features: &[String], action: Action) -> f64 {
        let a = action.index();
        features
            .iter()
            .filter_map(|f| self.weights.get(f))
            .map(|row| row[a])
            .sum()
    }

    pub fn scores(&self, features: &[String]) -> [f64; N_ACTIONS] {
        let mut out = [0.0; N_ACTIONS];
        for row in features.iter().filter_map(|f| self.weights.get(f)) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
        out
    }

    /// Writes the header line and one sorted `feature\taction\tweight` line
    /// per non-zero weight.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "#discoh-parser\ttemplates={}\tmargin={}",
            TEMPLATE_VERSION, self.margin
        )?;
        let mut lines: Vec<(String, String, f64)> = Vec::new();
        for (f, row) in &self.weights {
            for (i, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let name = Action::from_index(i).expect("index in range").name();
                    lines.push((f.clone(), name, v));
                }
            }
        }
        lines.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        for (f, a, v) in lines {
            writeln!(w, "{}\t{}\t{}", f, a, v)?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, ParserError> {
        let bad = |line: usize, reason: String| ParserError::ModelFormat { line, reason };
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let header = header.map_err(|e| bad(1, e.to_string()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("#discoh-parser") {
            return Err(bad(1, "not a parser model file".into()));
        }
        let mut margin = None;
        for field in fields {
            match field.split_once('=') {
                Some(("templates", v)) => {
                    let version: u32 = v.parse().map_err(|_| bad(1, format!("bad version {:?}", v)))?;
                    if version != TEMPLATE_VERSION {
                        return Err(bad(
                            1,
                            format!("feature templates v{} but this build uses v{}", version, TEMPLATE_VERSION),
                        ));
                    }
                }
                Some(("margin", v)) => {
                    margin = Some(v.parse::<f64>().map_err(|_| bad(1, format!("bad margin {:?}", v)))?)
                }
                _ => return Err(bad(1, format!("unknown header field {:?}", field))),
            }
        }
        let mut model = LinearMarginModel {
            margin: margin.ok_or_else(|| bad(1, "header lacks margin".into()))?,
            weights: HashMap::new(),
        };
        for (i, line) in lines {
            let n = i + 1;
            let line = line.map_err(|e| bad(n, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [feature, action, weight] = parts[..] else {
                return Err(bad(n, format!("expected 3 tab-separated fields, got {}", parts.len())));
            };
            let action = Action::from_name(action).ok_or_else(|| bad(n, format!("unknown action {:?}", action)))?;
            let weight: f64 = weight.parse().map_err(|_| bad(n, format!("bad weight {:?}", weight)))?;
            if !weight.is_finite() {
                return Err(bad(n, "weight is not finite".into()));
            }
            model.weights.entry(feature.to_string()).or_insert([0.0; N_ACTIONS])[action.index()] = weight;
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            margin: 1.0,
            seed: 0,
        }
    }
}

/// Perceptron weights with the running sums needed for averaging.
struct Averager {
    ids: HashMap<String, usize>,
    names: Vec<String>,
    w: Vec<[f64; N_ACTIONS]>,
    u: Vec<[f64; N_ACTIONS]>,
    c: f64,
}

impl Averager {
    fn new() -> Self {
        Averager {
            ids: HashMap::new(),
            names: Vec::new(),
            w: Vec::new(),
            u: Vec::new(),
            c: 1.0,
        }
    }

    fn ids_for(&mut self, features: &[String]) -> Vec<usize> {
        features
            .iter()
            .map(|f| {
                if let Some(&id) = self.ids.get(f) {
                    return id;
                }
                let id = self.names.len();
                self.ids.insert(f.clone(), id);
                self.names.push(f.clone());
                self.w.push([0.0; N_ACTIONS]);
                self.u.push([0.0; N_ACTIONS]);
                id
            })
            .collect()
    }

    fn score(&self, ids: &[usize], a: usize) -> f64 {
        ids.iter().map(|&i| self.w[i][a]).sum()
    }

    fn update(&mut self, ids: &[usize], a: usize, delta: f64) {
        for &i in ids {
            self.w[i][a] += delta;
            self.u[i][a] += self.c * delta;
        }
    }

    fn averaged(&self) -> HashMap<String, [f64; N_ACTIONS]> {
        let mut out = HashMap::new();
        for (i, name) in self.names.iter().enumerate() {
            let mut row = [0.0; N_ACTIONS];
            for a in 0..N_ACTIONS {
                row[a] = self.w[i][a] - self.u[i][a] / self.c;
            }
            if row.iter().any(|&v| v != 0.0) {
                out.insert(name.clone(), row);
            }
        }
        out
    }
}

/// Statistics of one training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub updates_per_epoch: Vec<usize>,
}

pub fn train(examples: &[ParagraphExample], cfg: &TrainConfig) -> Result<LinearMarginModel, ParserError> {
    train_with_report(examples, cfg).map(|(m, _)| m)
}

/// Teacher-forced training along oracle paths. At each state the highest
/// scoring wrong legal action must trail the gold action by `margin`,
/// otherwise features move towards gold and away from it.
pub fn train_with_report(
    examples: &[ParagraphExample],
    cfg: &TrainConfig,
) -> Result<(LinearMarginModel, TrainReport), ParserError> {
    if examples.is_empty() {
        return Err(ParserError::EmptyCorpus);
    }
    if !(cfg.margin.is_finite() && cfg.margin >= 0.0) {
        return Err(ParserError::BadMargin(cfg.margin));
    }
    let mut oracles = Vec::with_capacity(examples.len());
    for (index, ex) in examples.iter().enumerate() {
        let leaves = ex.tree.leaf_count();
        if leaves != ex.sentences.len() {
            return Err(ParserError::SentenceMismatch {
                index,
                leaves,
                sentences: ex.sentences.len(),
            });
        }
        oracles.push(oracle_actions(&ex.tree)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut avg = Averager::new();
    let mut report = TrainReport::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut updates = 0;
        for &k in &order {
            let ex = &examples[k];
            let mut state = ParserState::initial(&ex.sentences);
            for &gold in &oracles[k] {
                let legal = state.legal_actions();
                if legal.len() > 1 {
                    let ids = avg.ids_for(&extract_features(&state));
                    let g = gold.index();
                    let gold_score = avg.score(&ids, g);
                    let wrong = legal
                        .iter()
                        .map(|a| a.index())
                        .filter(|&a| a != g)
                        .fold(None::<(usize, f64)>, |best, a| {
                            let s = avg.score(&ids, a);
                            match best {
                                Some((_, bs)) if bs >= s => best,
                                _ => Some((a, s)),
                            }
                        });
                    if let Some((w, wrong_score)) = wrong {
                        if wrong_score + cfg.margin >= gold_score {
                            avg.update(&ids, g, 1.0);
                            avg.update(&ids, w, -1.0);
                            updates += 1;
                        }
                    }
                    avg.c += 1.0;
                }
                state.apply_mut(gold)?;
            }
        }
        log::debug!("parser epoch: {} updates", updates);
        report.updates_per_epoch.push(updates);
    }
    Ok((
        LinearMarginModel {
            margin: cfg.margin,
            weights: avg.averaged(),
        },
        report,
    ))
}

/// Decoding trace: the tree plus how many times the model was consulted.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tree: RstTree,
    pub actions: Vec<Action>,
    pub model_queries: usize,
}

/// Greedy decoding. Forced moves (a single legal action) skip the model;
/// ties go to the earliest action in enumeration order.
pub fn decode(sentences: &[String], model: &LinearMarginModel) -> Result<Decoded, ParserError> {
    if sentences.is_empty() {
        return Err(ParserError::NoSentences);
    }
    let mut state = ParserState::initial(sentences);
    let mut actions = Vec::with_capacity(2 * sentences.len());
    let mut queries = 0;
    loop {
        let legal = state.legal_actions();
        let action = match legal.len() {
            0 => break,
            1 => legal[0],
            _ => {
                queries += 1;
                let scores = model.scores(&extract_features(&state));
                let mut best = legal[0];
                for &a in &legal[1..] {
                    if scores[a.index()] > scores[best.index()] {
                        best = a;
                    }
                }
                best
            }
        };
        state.apply_mut(action)?;
        actions.push(action);
    }
    let tree = state.result().cloned().expect("decoding ends in a single tree");
    Ok(Decoded {
        tree,
        actions,
        model_queries: queries,
    })
}

pub fn parse(sentences: &[String], model: &LinearMarginModel) -> Result<RstTree, ParserError> {
    decode(sentences, model).map(|d| d.tree)
}
