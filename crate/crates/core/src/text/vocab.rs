use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{tokenize, ParallelDocument, TokenId, TokenSeq};

pub const UNK: TokenId = 0;
pub const PAD: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;
pub const BRK: TokenId = 4;
pub const MASK: TokenId = 5;

/// Surface strings of the reserved tokens, indexed by id.
pub const RESERVED: [&str; 6] = ["<unk>", "<pad>", "<bos>", "<eos>", "<brk>", "<mask>"];

pub fn is_reserved(id: TokenId) -> bool {
    (id as usize) < RESERVED.len()
}

/// Word-level vocabulary shared by source and target sides.
///
/// Reserved tokens always occupy ids 0..6 in the order of [`RESERVED`].
/// Once built a vocabulary is immutable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    to_id: HashMap<String, TokenId>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Vocabulary holding only the reserved tokens.
    pub fn reserved_only() -> Self {
        Self::from_words(std::iter::empty::<String>()).expect("reserved tokens are valid")
    }

    /// Builds a vocabulary from non-reserved words in id order.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            to_id: HashMap::new(),
            tokens: Vec::new(),
        };
        for r in RESERVED {
            v.push(r.to_string())?;
        }
        for w in words {
            v.push(w.into())?;
        }
        Ok(v)
    }

    fn push(&mut self, word: String) -> Result<()> {
        if word.is_empty() || word.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "invalid vocabulary entry {word:?}"
            )));
        }
        if self.to_id.contains_key(&word) {
            return Err(Error::InvalidConfig(format!(
                "duplicate vocabulary entry {word:?}"
            )));
        }
        self.to_id.insert(word.clone(), self.tokens.len() as TokenId);
        self.tokens.push(word);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.to_id.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        (id as usize) < self.tokens.len()
    }

    /// Non-reserved entries in id order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens[RESERVED.len()..].iter().map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> TokenSeq {
        TokenSeq::new(tokenize(text).iter().map(|t| self.id_or_unk(t)).collect())
    }

    pub fn decode(&self, seq: &[TokenId]) -> String {
        let words: Vec<&str> = seq
            .iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]))
            .collect();
        words.join(" ")
    }

    /// One non-reserved token per line; line `i` (0-based) holds id `i + 6`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for w in self.words() {
            out.push_str(w);
            out.push('\n');
        }
        crate::report::write_atomic(path, out.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_words(text.lines().filter(|l| !l.is_empty()).map(str::to_string))
    }
}

/// Counts surface tokens on both sides of the corpus and keeps the most
/// frequent ones with count >= `min_freq`. `max_size` includes the six
/// reserved entries. Ties are broken lexicographically.
pub fn build_vocab(corpus: &[ParallelDocument], min_freq: usize, max_size: usize) -> Result<Vocabulary> {
    if corpus.iter().all(|d| d.pairs.is_empty()) {
        return Err(Error::EmptyCorpus);
    }
    if min_freq == 0 {
        return Err(Error::InvalidConfig("min_freq must be >= 1".into()));
    }
    if max_size < RESERVED.len() {
        return Err(Error::InvalidConfig(format!(
            "max_size {max_size} is smaller than the {} reserved tokens",
            RESERVED.len()
        )));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in corpus {
        for (s, t) in &doc.pairs {
            for tok in tokenize(s).into_iter().chain(tokenize(t)) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(w, c)| *c >= min_freq && !RESERVED.contains(&w.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Vocabulary::from_words(ranked.into_iter().map(|(w, _)| w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(pairs: &[(&str, &str)]) -> ParallelDocument {
        ParallelDocument::new(
            "d",
            pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocabulary::reserved_only();
        for (i, r) in RESERVED.iter().enumerate() {
            assert_eq!(v.id(r), Some(i as TokenId));
        }
        assert_eq!(v.id("<brk>"), Some(BRK));
        assert_eq!(v.id("<mask>"), Some(MASK));
    }

    #[test]
    fn min_freq_filters() {
        let v = build_vocab(&[doc(&[("a a b", "")])], 2, 100).unwrap();
        assert_eq!(v.words().collect::<Vec<_>>(), vec!["a"]);
        assert_eq!(v.len(), 7);
    }

    #[test]
    fn deterministic_ids() {
        let corpus = vec![doc(&[("x y z y", "z q q")]), doc(&[("b a", "a b")])];
        let a = build_vocab(&corpus, 1, 100).unwrap();
        let b = build_vocab(&corpus, 1, 100).unwrap();
        assert_eq!(a, b);
        // equal counts sort lexicographically
        assert_eq!(a.words().collect::<Vec<_>>(), vec!["a", "b", "q", "y", "z", "x"]);
    }

    #[test]
    fn cap_keeps_most_frequent() {
        // brute force: count, sort by (-count, word), take 3
        let text = "w0 w1 w1 w2 w2 w2 w3 w3 w3 w3 w4 w5 w6 w7 w8 w9 w9";
        let mut counts: Vec<(String, usize)> = Vec::new();
        for w in text.split(' ') {
            match counts.iter_mut().find(|(x, _)| x == w) {
                Some((_, c)) => *c += 1,
                None => counts.push((w.to_string(), 1)),
            }
        }
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let expected: Vec<String> = counts.into_iter().take(3).map(|(w, _)| w).collect();
        assert_eq!(expected, vec!["w3", "w2", "w1"]);

        let v = build_vocab(&[doc(&[(text, "")])], 1, 6 + 3).unwrap();
        assert_eq!(v.words().map(String::from).collect::<Vec<_>>(), expected);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_vocab(&[], 1, 10), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn persist_round_trip() {
        let v = Vocabulary::from_words(["le", "la", "chat"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "le\nla\nchat\n");
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
