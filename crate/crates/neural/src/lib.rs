//! Dense f64 tensors, a tape-based reverse-mode autodiff graph, and the
//! handful of layers (LSTM cell, MLP, bidirectional LSTM encoder) the
//! grammar and language models are built from.

mod checkpoint;
mod error;
mod gradcheck;
mod graph;
mod init;
mod nn;
mod optim;
mod tensor;

pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_VERSION};
pub use error::NeuralError;
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use graph::{Gradients, Graph, Var, MASKED_LOG_PROB};
pub use init::Init;
pub use nn::{bilstm_encode, Activation, BiLstm, LstmCell, Mlp};
pub use optim::{Adam, AdamConfig};
pub use tensor::{ParamId, ParamSet, Tensor};

pub type Result<T> = std::result::Result<T, NeuralError>;
