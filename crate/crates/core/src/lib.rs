//! Context-aware neural machine translation with attention supervision.
//!
//! The crate provides a compact encoder-decoder transformer with exact
//! reverse-mode gradients, a training loop that pulls designated attention
//! rows toward human-annotated supporting context, alignment metrics
//! between model attention and those annotations, contrastive and masking
//! evaluation, and a generator for contrastive word-sense test sets.
//!
//! Module map:
//!
//! * [`text`]: vocabulary, tokenization, document corpora, `<brk>` concatenation.
//! * [`scat`]: rationale-annotated examples and human attention vectors.
//! * [`nn`]: the transformer, its autodiff tape, decoding and checkpoints.
//! * [`train`]: optimizer, learning-rate schedule, regularized training.
//! * [`metrics`]: dot / KL / probes-needed alignment, sweeps, BLEU, f-measure, bootstrap.
//! * [`eval`]: contrastive scoring, context masking, document translation.
//! * [`wsd`]: contrastive word-sense example forging from aligned corpora.
//! * [`synth`]: a seeded toy language with pronoun anaphora for end-to-end runs.
//! * [`cli`]: experiment configuration and the command implementations.

pub mod cli;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod nn;
pub mod report;
pub mod scat;
pub mod synth;
pub mod text;
pub mod train;
pub mod wsd;

pub use error::{Error, Result};
