//! The joint network: a shared BiLSTM encoder feeding a CRF tagger and an
//! attention decoder over template tokens.

pub mod crf;
mod io;
pub mod lstm;
pub mod network;
mod params;
mod predict;
mod train;
mod vocab;

pub use crf::{crf_log_likelihood, log_partition, path_score, viterbi_decode};
pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use lstm::lstm_cell;
pub use network::{decode_step, encode, joint_loss, DecoderState, LossWeights};
pub use params::{
    init_params, init_weights, is_structural, Hyperparams, LstmWeights, ModelParams, Weights, END,
    START, TAGS,
};
pub use predict::{predict, Prediction};
pub use train::{
    build_vocabularies, train, train_weights, write_log, EpochLog, Instance, TrainMode,
};
pub use vocab::{Vocabulary, EOS, EOS_ID, PAD, PAD_ID, SOS, SOS_ID, UNK, UNK_ID};

use thiserror::Error;

use crate::text::TextError;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("question has no tokens")]
    EmptyQuestion,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("embeddings: {0}")]
    Text(#[from] TextError),
}
