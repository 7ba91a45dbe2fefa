//! Attention/rationale alignment, translation quality and significance.

mod alignment;
mod bleu;
mod bootstrap;

pub use alignment::{
    dot_alignment, kl_alignment, probes_needed, query_row, row_scores, score_row, sweep, AlignmentReport, AttentionSource, Cell,
    HeadMode, Metric, Scores,
};
pub use bleu::{bleu, pronoun_set, word_fmeasure, BleuStats, WordFMeasure, MAX_ORDER};
pub use bootstrap::{paired_bootstrap, MIN_RESAMPLES};
