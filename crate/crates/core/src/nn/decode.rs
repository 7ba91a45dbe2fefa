//! Greedy and beam-search decoding, plus teacher-forced scoring.

use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::model::{decoder_io, Model};
use crate::error::Result;
use crate::text::{TokenId, BOS, EOS, PAD};

/// Anything that can score target continuations given a source.
pub trait Seq2Seq {
    type Memory;

    fn encode(&self, src: &[TokenId]) -> Result<Self::Memory>;

    /// Log-probability rows for every position of `tgt_in` (which starts
    /// with `<bos>`); row `t` is the distribution of the token after
    /// `tgt_in[..=t]`.
    fn decoder_logprobs(&self, mem: &Self::Memory, tgt_in: &[TokenId]) -> Result<Mat>;
}

impl Seq2Seq for Model {
    type Memory = Mat;

    fn encode(&self, src: &[TokenId]) -> Result<Mat> {
        Model::encode(self, src)
    }

    fn decoder_logprobs(&self, mem: &Mat, tgt_in: &[TokenId]) -> Result<Mat> {
        Model::decoder_logprobs(self, mem, tgt_in)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method", content = "width")]
pub enum DecodeMethod {
    Greedy,
    Beam(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated tokens after the forced prefix, without `<eos>`.
    pub tokens: Vec<TokenId>,
    /// Sum of log-probabilities of the generated tokens (and `<eos>` if emitted).
    pub score: f64,
    pub finished: bool,
}

/// Tokens that are never generated.
fn banned(t: usize) -> bool {
    t == PAD as usize || t == BOS as usize
}

fn next_row<M: Seq2Seq>(model: &M, mem: &M::Memory, prefix: &[TokenId], generated: &[TokenId]) -> Result<Vec<f64>> {
    let mut y = prefix.to_vec();
    y.extend_from_slice(generated);
    let (tgt_in, _) = decoder_io(&y);
    let lp = model.decoder_logprobs(mem, &tgt_in)?;
    Ok(lp.row(lp.rows - 1).to_vec())
}

/// Argmax decoding; ties go to the lowest token id.
pub fn greedy<M: Seq2Seq>(model: &M, src: &[TokenId], prefix: &[TokenId], max_len: usize) -> Result<Hypothesis> {
    let mem = model.encode(src)?;
    let mut tokens = Vec::new();
    let mut score = 0.0;
    while tokens.len() < max_len {
        let row = next_row(model, &mem, prefix, &tokens)?;
        let (best, lp) = row
            .iter()
            .enumerate()
            .filter(|(t, _)| !banned(*t))
            .fold((None, f64::NEG_INFINITY), |acc, (t, &v)| {
                if acc.0.is_none() || v > acc.1 {
                    (Some(t), v)
                } else {
                    acc
                }
            });
        let best = best.expect("vocabulary has generatable tokens");
        score += lp;
        if best == EOS as usize {
            return Ok(Hypothesis { tokens, score, finished: true });
        }
        tokens.push(best as TokenId);
    }
    Ok(Hypothesis { tokens, score, finished: false })
}

/// Beam search over unnormalized log-probability sums. At each step the
/// best `width` expansions survive; expansions ending in `<eos>` or reaching
/// `max_len` tokens are set aside as finished. Search stops once no live
/// beam can still beat the best finished hypothesis.
pub fn beam_search<M: Seq2Seq>(
    model: &M,
    src: &[TokenId],
    prefix: &[TokenId],
    width: usize,
    max_len: usize,
) -> Result<Hypothesis> {
    let width = width.max(1);
    let mem = model.encode(src)?;
    let mut live: Vec<(Vec<TokenId>, f64)> = vec![(Vec::new(), 0.0)];
    let mut finished: Vec<Hypothesis> = Vec::new();
    if max_len == 0 {
        return Ok(Hypothesis { tokens: Vec::new(), score: 0.0, finished: false });
    }
    while !live.is_empty() {
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        for (b, (toks, score)) in live.iter().enumerate() {
            let row = next_row(model, &mem, prefix, toks)?;
            for (t, &lp) in row.iter().enumerate() {
                if !banned(t) {
                    cands.push((score + lp, b, t));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut next = Vec::with_capacity(width);
        for &(score, b, t) in cands.iter().take(width) {
            let mut toks = live[b].0.clone();
            if t == EOS as usize {
                finished.push(Hypothesis { tokens: toks, score, finished: true });
                continue;
            }
            toks.push(t as TokenId);
            if toks.len() >= max_len {
                finished.push(Hypothesis { tokens: toks, score, finished: false });
            } else {
                next.push((toks, score));
            }
        }
        live = next;
        let best_done = finished.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if !finished.is_empty() && live.iter().all(|(_, s)| *s <= best_done) {
            break;
        }
    }
    let mut best = finished.swap_remove(0);
    for h in finished {
        if h.score > best.score {
            best = h;
        }
    }
    Ok(best)
}

pub fn decode<M: Seq2Seq>(
    model: &M,
    src: &[TokenId],
    prefix: &[TokenId],
    method: DecodeMethod,
    max_len: usize,
) -> Result<Hypothesis> {
    match method {
        DecodeMethod::Greedy => greedy(model, src, prefix, max_len),
        DecodeMethod::Beam(w) => beam_search(model, src, prefix, w, max_len),
    }
}

/// Per-token teacher-forced log-probabilities of `y` (no `<eos>` term).
pub fn token_logprobs<M: Seq2Seq>(model: &M, src: &[TokenId], y: &[TokenId]) -> Result<Vec<f64>> {
    let mem = model.encode(src)?;
    let (tgt_in, tgt_out) = decoder_io(y);
    let lp = model.decoder_logprobs(&mem, &tgt_in)?;
    Ok((0..y.len()).map(|t| lp.at(t, tgt_out[t] as usize)).collect())
}
