//! The compact transformer: matrices, autodiff tape, model, decoding and
//! checkpoints.

pub mod checkpoint;
pub mod decode;
pub mod mat;
pub mod model;
pub mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use decode::{beam_search, decode, greedy, token_logprobs, DecodeMethod, Hypothesis, Seq2Seq};
pub use mat::Mat;
pub use model::{
    decoder_io, loss_mt, AttentionMaps, DropoutRng, ForwardTrace, HeadSelection, Hyperparams, Model, Parameters,
};
pub use tape::{Tape, Var};
