//! Corpus data model, tokenization and concatenation-based context assembly.
//!
//! Context is incorporated by concatenation: the previous `n` source
//! sentences (and `m` target sentences) are prepended to the current one,
//! with a single `<brk>` token between consecutive sentences.

mod corpus;
mod vocab;

pub use corpus::{read_corpus, write_corpus, ParallelDocument};
pub use vocab::{build_vocab, is_reserved, Vocabulary, BOS, BRK, EOS, MASK, PAD, RESERVED, UNK};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Splits on whitespace, then splits every punctuation character into its
/// own token. A whitespace-delimited chunk equal to a reserved token string
/// (e.g. `<brk>`) is kept whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if RESERVED.contains(&chunk) {
            out.push(chunk.to_string());
            continue;
        }
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_ascii_punctuation() || is_unicode_punct(c) {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            } else {
                word.push(c);
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '«' | '»' | '…' | '“' | '”' | '‘' | '’' | '–' | '—' | '¿' | '¡')
}

/// A token id sequence, optionally carrying the start offsets of each
/// constituent sentence when it was assembled from several.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub ids: Vec<TokenId>,
    /// Index of the first token of each sentence; empty when unknown.
    pub boundaries: Vec<usize>,
}

impl TokenSeq {
    pub fn new(ids: Vec<TokenId>) -> Self {
        TokenSeq {
            ids,
            boundaries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Half-open token range of sentence `k` (in concatenation order),
    /// excluding the trailing `<brk>`.
    pub fn sentence_range(&self, k: usize) -> Option<std::ops::Range<usize>> {
        let start = *self.boundaries.get(k)?;
        let end = match self.boundaries.get(k + 1) {
            Some(&next) => next - 1,
            None => self.ids.len(),
        };
        Some(start..end)
    }

    pub fn sentence_count(&self) -> usize {
        self.boundaries.len().max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    /// Previous source sentences.
    pub n: usize,
    /// Previous target sentences.
    pub m: usize,
}

impl ContextConfig {
    pub fn new(n: usize, m: usize) -> Self {
        ContextConfig { n, m }
    }

    pub fn label(&self) -> String {
        format!("{}+{}", self.n, self.m)
    }
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { n: 5, m: 5 }
    }
}

/// Joins already-chosen sentences with `<brk>` and records boundaries.
pub fn join_sentences<S: AsRef<str>>(sentences: &[S], vocab: &Vocabulary) -> TokenSeq {
    let mut seq = TokenSeq::default();
    for (k, s) in sentences.iter().enumerate() {
        if k > 0 {
            seq.ids.push(BRK);
        }
        seq.boundaries.push(seq.ids.len());
        seq.ids.extend(vocab.encode(s.as_ref()).ids);
    }
    seq
}

/// Concatenates up to `window` trailing context sentences with `current`.
pub fn concat_with_context<S: AsRef<str>>(
    context: &[S],
    current: &str,
    window: usize,
    vocab: &Vocabulary,
) -> TokenSeq {
    let take = window.min(context.len());
    let mut parts: Vec<&str> = context[context.len() - take..]
        .iter()
        .map(AsRef::as_ref)
        .collect();
    parts.push(current);
    join_sentences(&parts, vocab)
}

/// Source and target sequences for sentence `j` of `doc`, with
/// `min(n, j)` previous source and `min(m, j)` previous target sentences.
pub fn concat_context(
    doc: &ParallelDocument,
    j: usize,
    cfg: ContextConfig,
    vocab: &Vocabulary,
) -> Result<(TokenSeq, TokenSeq)> {
    if j >= doc.pairs.len() {
        return Err(Error::OutOfRange(format!(
            "sentence {j} of document {} with {} sentences",
            doc.id,
            doc.pairs.len()
        )));
    }
    let srcs: Vec<&str> = doc.pairs[..j].iter().map(|p| p.0.as_str()).collect();
    let tgts: Vec<&str> = doc.pairs[..j].iter().map(|p| p.1.as_str()).collect();
    Ok((
        concat_with_context(&srcs, &doc.pairs[j].0, cfg.n, vocab),
        concat_with_context(&tgts, &doc.pairs[j].1, cfg.m, vocab),
    ))
}

/// Token span after the last `<brk>` (the whole sequence if there is none).
pub fn current_sentence_span(seq: &TokenSeq) -> (usize, usize) {
    let start = seq
        .ids
        .iter()
        .rposition(|&t| t == BRK)
        .map_or(0, |p| p + 1);
    (start, seq.ids.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(["a", "b", "c", "d", "e", "f", "oui", "il", "est", "x", "y", "z"]).unwrap()
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Oui, il est là."), vec!["Oui", ",", "il", "est", "là", "."]);
        assert_eq!(tokenize("l'infirmerie"), vec!["l", "'", "infirmerie"]);
        assert_eq!(tokenize("a <brk> b"), vec!["a", "<brk>", "b"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn encode_decode_round_trip() {
        let v = vocab();
        let seq = v.encode("oui il est");
        assert_eq!(seq.len(), 3);
        assert_eq!(v.decode(&seq.ids), "oui il est");
    }

    #[test]
    fn oov_maps_to_unk() {
        let v = vocab();
        let seq = v.encode("oui elle est");
        assert_eq!(seq.ids[1], UNK);
        assert_eq!(v.decode(&seq.ids), "oui <unk> est");
    }

    #[test]
    fn empty_text_is_empty_seq() {
        assert!(vocab().encode("").is_empty());
    }

    fn doc(srcs: &[&str]) -> ParallelDocument {
        ParallelDocument::new(
            "t",
            srcs.iter().map(|s| (s.to_string(), s.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn context_separated_by_brk() {
        let v = vocab();
        let d = doc(&["a b", "c d", "e f"]);
        let (src, _) = concat_context(&d, 2, ContextConfig::new(2, 0), &v).unwrap();
        assert_eq!(v.decode(&src.ids), "a b <brk> c d <brk> e f");
        assert_eq!(src.boundaries, vec![0, 3, 6]);
    }

    #[test]
    fn document_start_has_no_context() {
        let v = vocab();
        let d = doc(&["a b", "c d"]);
        let (src, tgt) = concat_context(&d, 0, ContextConfig::new(5, 5), &v).unwrap();
        assert!(!src.ids.contains(&BRK));
        assert!(!tgt.ids.contains(&BRK));
    }

    #[test]
    fn context_truncated_at_document_start() {
        let v = vocab();
        let d = doc(&["a", "b", "c", "d", "e"]);
        let (src, tgt) = concat_context(&d, 3, ContextConfig::new(5, 1), &v).unwrap();
        assert_eq!(src.ids.iter().filter(|&&t| t == BRK).count(), 3);
        assert_eq!(tgt.ids.iter().filter(|&&t| t == BRK).count(), 1);
        assert_eq!(v.decode(&tgt.ids), "c <brk> d");
    }

    #[test]
    fn out_of_range_sentence() {
        let d = doc(&["a"]);
        assert!(concat_context(&d, 1, ContextConfig::default(), &vocab()).is_err());
    }

    #[test]
    fn current_span_cases() {
        let v = vocab();
        assert_eq!(current_sentence_span(&v.encode("a b <brk> c d")), (3, 5));
        assert_eq!(current_sentence_span(&v.encode("a b")), (0, 2));
        assert_eq!(current_sentence_span(&v.encode("x <brk> y <brk> z")), (4, 5));
    }

    proptest! {
        #[test]
        fn brk_count_and_partition(n in 0usize..7, m in 0usize..7, j in 0usize..6, lens in proptest::collection::vec(1usize..4, 6)) {
            let v = vocab();
            let sents: Vec<String> = lens.iter().map(|&l| vec!["a"; l].join(" ")).collect();
            let d = ParallelDocument::new("p", sents.iter().map(|s| (s.clone(), s.clone())).collect()).unwrap();
            let (src, tgt) = concat_context(&d, j, ContextConfig::new(n, m), &v).unwrap();
            prop_assert_eq!(src.ids.iter().filter(|&&t| t == BRK).count(), n.min(j));
            prop_assert_eq!(tgt.ids.iter().filter(|&&t| t == BRK).count(), m.min(j));
            for seq in [&src, &tgt] {
                prop_assert_eq!(seq.boundaries[0], 0);
                for w in seq.boundaries.windows(2) {
                    prop_assert!(w[0] < w[1]);
                    prop_assert_eq!(seq.ids[w[1] - 1], BRK);
                }
                let brks: Vec<usize> = seq.ids.iter().enumerate().filter(|(_, &t)| t == BRK).map(|(i, _)| i + 1).collect();
                prop_assert_eq!(&brks[..], &seq.boundaries[1..]);
            }
        }

        #[test]
        fn encode_decode_identity(ids in proptest::collection::vec(0u32..18, 0..20)) {
            let v = vocab();
            let text = v.decode(&ids);
            prop_assert_eq!(v.encode(&text).ids, ids);
        }
    }
}
