//! From-scratch neural text classifiers: embedding, 1-D convolution,
//! LSTM/BiLSTM, dropout, dense and softmax layers trained with categorical
//! cross-entropy, L2 and Adam, plus finite-difference gradient checks.
//!
//! Everything runs in `f64` on one thread. Documents enter as token ids
//! with 0 reserved for padding; pads are removed before the network sees a
//! sequence, so padding never changes a prediction.

mod io;
mod layers;
mod net;
mod tensor;
mod train;

pub use io::{load_word2vec, Checkpoint, TokenMap};
pub use layers::{
    bilstm_forward, conv1d_forward, cross_entropy, dropout_mask, embed, glorot, lstm_forward, max_pool_backward,
    max_pool_forward, softmax, BiLstm, Conv1d, Dense, Embedding, Lstm, Param,
};
pub use net::{grad_check, relative_error, AdamConfig, ConvSpec, GradCheck, NetSpec, Network, Recurrent, RecurrentSpec};
pub use tensor::Tensor;
pub use train::{batch_loss, evaluate_split, predict, train, train_from, write_training_log, Adam, EpochLog, Example};
