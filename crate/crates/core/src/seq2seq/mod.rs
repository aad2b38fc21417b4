//! Encoder-decoder LSTM with additive attention over shot sequences, written
//! out by hand in `f64` with explicit backpropagation through time.

pub mod adam;
pub mod attention;
pub mod lstm;
pub mod model;
pub mod tensor;
pub mod train;

pub use crate::features::FeatureSeq;
pub use adam::AdamState;
pub use attention::{attend, AttentionParams};
pub use lstm::{lstm_step, LstmParams};
pub use model::{batch_loss, forward, loss_and_grad, EncDecModel, ForwardOutput, ModelShape, Params, Task};
pub use train::{
    act_inputs, act_sequences, fit, predict, predict_acts, predict_relations, relation_inputs,
    relation_sequences, token_accuracy, train_acts, train_relations, ActExample, ActsSource,
    RelationExample, Seq2SeqConfig, Sequence, TrainReport, DEFAULT_HIDDEN,
};

#[derive(Debug, thiserror::Error)]
pub enum Seq2SeqError {
    #[error("{what}: expected size {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sequence has no shots")]
    EmptySequence,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("example {index}: feature dimension {got}, expected {expected}")]
    InconsistentDims {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}
