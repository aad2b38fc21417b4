use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::model::{forward, loss_and_grad, EncDecModel, ModelShape, Task};
use super::Seq2SeqError;
use crate::features::FeatureSeq;
use crate::model::{ActKind, VideoRelation};

/// Best-performing width reported for the original system.
pub const DEFAULT_HIDDEN: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqConfig {
    pub hidden_size: usize,
    pub embed_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout_p: f64,
    /// Global gradient-norm clip per update; 0 disables.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for Seq2SeqConfig {
    fn default() -> Self {
        Seq2SeqConfig {
            hidden_size: DEFAULT_HIDDEN,
            embed_dim: 32,
            epochs: 30,
            learning_rate: 1e-3,
            dropout_p: 0.5,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActExample {
    pub features: FeatureSeq,
    pub acts: Vec<ActKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationExample {
    pub features: FeatureSeq,
    pub acts: Vec<ActKind>,
    pub relations: Vec<VideoRelation>,
}

/// Where the act inputs of the relation model come from.
#[derive(Debug, Clone, Copy)]
pub enum ActsSource<'a> {
    Gold,
    Predicted(&'a EncDecModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    /// Summed training loss of each epoch, with dropout as trained.
    pub epoch_losses: Vec<f64>,
}

/// Pooled shot vectors.
pub fn act_inputs(features: &FeatureSeq) -> Vec<Vec<f64>> {
    features.pooled()
}

/// Pooled shot vectors each followed by a one-hot act.
pub fn relation_inputs(features: &FeatureSeq, acts: &[ActKind]) -> Result<Vec<Vec<f64>>, Seq2SeqError> {
    if acts.len() != features.n_shots() {
        return Err(Seq2SeqError::Shape {
            what: "act sequence",
            expected: features.n_shots(),
            got: acts.len(),
        });
    }
    Ok(features
        .pooled()
        .into_iter()
        .zip(acts)
        .map(|(mut x, a)| {
            let mut one_hot = [0.0; 3];
            one_hot[a.index()] = 1.0;
            x.extend_from_slice(&one_hot);
            x
        })
        .collect())
}

pub type Sequence = (Vec<Vec<f64>>, Vec<usize>);

/// Trains a fresh model on `(inputs, labels)` sequences, one Adam update per
/// sequence in a seeded order. `on_epoch(epoch, model)` runs after every
/// epoch and stops training by returning false.
pub fn fit(
    task: Task,
    data: &[Sequence],
    n_labels: usize,
    cfg: &Seq2SeqConfig,
    on_epoch: &mut dyn FnMut(usize, &EncDecModel) -> bool,
) -> Result<(EncDecModel, TrainReport), Seq2SeqError> {
    let first = data.first().ok_or(Seq2SeqError::EmptyCorpus)?;
    let dim = first.0.first().ok_or(Seq2SeqError::EmptySequence)?.len();
    for (i, (x, _)) in data.iter().enumerate() {
        if let Some(v) = x.iter().find(|v| v.len() != dim) {
            return Err(Seq2SeqError::InconsistentDims {
                index: i,
                expected: dim,
                got: v.len(),
            });
        }
    }
    let shape = ModelShape {
        input_dim: dim,
        hidden_size: cfg.hidden_size,
        embed_dim: cfg.embed_dim,
        n_labels,
    };
    let mut model = EncDecModel::new(task, shape, cfg.dropout_p, cfg.seed)?;
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Seq2SeqError::Config("learning rate must be positive".into()));
    }
    let mut adam = AdamState::new(&model.params, cfg.learning_rate);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    drop_rng.set_stream(2);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
    };
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for &i in &order {
            let (x, y) = &data[i];
            let (loss, mut g) = loss_and_grad(&model, x, y, Some(&mut drop_rng))?;
            total += loss;
            if cfg.clip_norm > 0.0 {
                let n = g.norm();
                if n > cfg.clip_norm {
                    g.scale(cfg.clip_norm / n);
                }
            }
            adam.update(&mut model.params, &g);
        }
        log::debug!("epoch {} loss {:.6}", epoch + 1, total);
        report.epoch_losses.push(total);
        if !on_epoch(epoch + 1, &model) {
            break;
        }
    }
    Ok((model, report))
}

pub fn act_sequences(examples: &[ActExample]) -> Result<Vec<Sequence>, Seq2SeqError> {
    examples
        .iter()
        .map(|e| {
            if e.acts.len() != e.features.n_shots() {
                return Err(Seq2SeqError::Shape {
                    what: "act sequence",
                    expected: e.features.n_shots(),
                    got: e.acts.len(),
                });
            }
            Ok((act_inputs(&e.features), e.acts.iter().map(|a| a.index()).collect()))
        })
        .collect()
}

pub fn relation_sequences(examples: &[RelationExample], source: ActsSource<'_>) -> Result<Vec<Sequence>, Seq2SeqError> {
    examples
        .iter()
        .map(|e| {
            let acts = match source {
                ActsSource::Gold => e.acts.clone(),
                ActsSource::Predicted(m) => predict_acts(m, &e.features)?,
            };
            if e.relations.len() != e.features.n_shots() {
                return Err(Seq2SeqError::Shape {
                    what: "relation sequence",
                    expected: e.features.n_shots(),
                    got: e.relations.len(),
                });
            }
            Ok((
                relation_inputs(&e.features, &acts)?,
                e.relations.iter().map(|r| r.index()).collect(),
            ))
        })
        .collect()
}

pub fn train_acts(examples: &[ActExample], cfg: &Seq2SeqConfig) -> Result<(EncDecModel, TrainReport), Seq2SeqError> {
    fit(Task::Acts, &act_sequences(examples)?, ActKind::ALL.len(), cfg, &mut |_, _| true)
}

pub fn train_relations(
    examples: &[RelationExample],
    source: ActsSource<'_>,
    cfg: &Seq2SeqConfig,
) -> Result<(EncDecModel, TrainReport), Seq2SeqError> {
    let data = relation_sequences(examples, source)?;
    fit(Task::Relations, &data, VideoRelation::ALL.len(), cfg, &mut |_, _| true)
}

/// Greedy decoding with the previous prediction fed back.
pub fn predict(model: &EncDecModel, inputs: &[Vec<f64>]) -> Result<Vec<usize>, Seq2SeqError> {
    Ok(forward(model, inputs, None)?.labels)
}

fn expect_task(model: &EncDecModel, task: Task) -> Result<(), Seq2SeqError> {
    if model.task != task {
        return Err(Seq2SeqError::Config(format!("model predicts {:?}, not {:?}", model.task, task)));
    }
    Ok(())
}

pub fn predict_acts(model: &EncDecModel, features: &FeatureSeq) -> Result<Vec<ActKind>, Seq2SeqError> {
    expect_task(model, Task::Acts)?;
    Ok(predict(model, &act_inputs(features))?
        .into_iter()
        .map(|i| ActKind::ALL[i])
        .collect())
}

pub fn predict_relations(
    model: &EncDecModel,
    features: &FeatureSeq,
    acts: &[ActKind],
) -> Result<Vec<VideoRelation>, Seq2SeqError> {
    expect_task(model, Task::Relations)?;
    Ok(predict(model, &relation_inputs(features, acts)?)?
        .into_iter()
        .map(|i| VideoRelation::ALL[i])
        .collect())
}

/// Fraction of greedy predictions equal to the gold labels.
pub fn token_accuracy(model: &EncDecModel, data: &[Sequence]) -> Result<f64, Seq2SeqError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (x, y) in data {
        let p = predict(model, x)?;
        hit += p.iter().zip(y).filter(|(a, b)| a == b).count();
        total += y.len();
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}
