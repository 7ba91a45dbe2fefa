//! Corpus BLEU-4 and pronoun/other word f-measure.
//!
//! Both tokenize with [`crate::text::tokenize`]. BLEU uses exponential
//! smoothing for orders with zero matches: the `k`-th such order gets
//! precision `1 / (2^k * total)`. Orders for which the hypotheses contain no
//! n-grams at all are left out of the geometric mean.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{tokenize, RESERVED};

pub const MAX_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sufficient statistics of corpus BLEU.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn add_sentence(&mut self, hyp: &str, reference: &str) {
        let h = tokenize(hyp);
        let r = tokenize(reference);
        self.hyp_len += h.len();
        self.ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            self.totals[n - 1] += h.len().saturating_sub(n - 1);
            self.matches[n - 1] += hc.iter().map(|(g, &c)| c.min(*rc.get(g).unwrap_or(&0))).sum::<usize>();
        }
    }

    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 || self.totals[0] == 0 {
            return 0.0;
        }
        let mut smooth = 1.0;
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            let total = self.totals[n];
            if total == 0 {
                continue;
            }
            let p = if self.matches[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * total as f64)
            } else {
                self.matches[n] as f64 / total as f64
            };
            log_sum += p.ln();
            orders += 1;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

/// Corpus-level BLEU in `[0, 100]`.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hyps: &[H], refs: &[R]) -> Result<f64> {
    if refs.is_empty() {
        return Err(Error::EmptyDataset("reference set"));
    }
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats.add_sentence(h.as_ref(), r.as_ref());
    }
    Ok(stats.score())
}

/// The default ambiguous-pronoun word set.
pub fn pronoun_set() -> BTreeSet<String> {
    ["il", "elle", "ils", "elles"].iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordFMeasure {
    /// Mean F1 over target-set words.
    pub target: f64,
    /// Mean F1 over all other words.
    pub other: f64,
    /// Examples contributing to `target` (target word in hypothesis or reference).
    pub target_examples: usize,
    pub other_examples: usize,
}

fn bag<'a>(tokens: &'a [String], keep: impl Fn(&str) -> bool) -> HashMap<&'a str, usize> {
    let mut m = HashMap::new();
    for t in tokens.iter().filter(|t| keep(t)) {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Clipped bag-of-words F1; `None` when both bags are empty.
fn bag_f1(h: &HashMap<&str, usize>, r: &HashMap<&str, usize>) -> Option<f64> {
    let hn: usize = h.values().sum();
    let rn: usize = r.values().sum();
    if hn == 0 && rn == 0 {
        return None;
    }
    let m: usize = h.iter().map(|(w, &c)| c.min(*r.get(w).unwrap_or(&0))).sum();
    if m == 0 {
        return Some(0.0);
    }
    let p = m as f64 / hn as f64;
    let rc = m as f64 / rn as f64;
    Some(2.0 * p * rc / (p + rc))
}

/// Per-example F1 on words inside `target_set` and on all other
/// (non-reserved) words, averaged over examples where that bag is
/// non-empty on at least one side.
pub fn word_fmeasure<H: AsRef<str>, R: AsRef<str>>(
    hyps: &[H],
    refs: &[R],
    target_set: &BTreeSet<String>,
) -> Result<WordFMeasure> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps.len(),
            right: refs.len(),
        });
    }
    let (mut ts, mut tn, mut os, mut on) = (0.0, 0, 0.0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize(h.as_ref());
        let r = tokenize(r.as_ref());
        let in_set = |w: &str| target_set.contains(w);
        let other = |w: &str| !target_set.contains(w) && !RESERVED.contains(&w);
        if let Some(f) = bag_f1(&bag(&h, in_set), &bag(&r, in_set)) {
            ts += f;
            tn += 1;
        }
        if let Some(f) = bag_f1(&bag(&h, other), &bag(&r, other)) {
            os += f;
            on += 1;
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(WordFMeasure {
        target: mean(ts, tn),
        other: mean(os, on),
        target_examples: tn,
        other_examples: on,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_empty() {
        let refs = ["le chat est sur le tapis .", "oui ."];
        assert_eq!(bleu(&refs, &refs).unwrap(), 100.0);
        assert_eq!(bleu(&["", ""], &refs).unwrap(), 0.0);
        assert!(bleu::<&str, &str>(&[], &[]).is_err());
        assert!(bleu(&["a"], &refs).is_err());
    }

    #[test]
    fn hand_counted_corpus() {
        // hyp1 "the cat sat on the mat" vs ref1 "the cat is on the mat"
        //   1-grams 5/6, 2-grams 3/5 (the cat, on the, the mat), 3-grams 1/4 (on the mat), 4-grams 0/3
        // hyp2 "a dog" vs ref2 "a dog barks"
        //   1-grams 2/2, 2-grams 1/1, no 3- or 4-grams
        // corpus: 7/8, 4/6, 1/4, 0/3 -> smoothed 1/(2*3); c = 8, r = 9
        let hyps = ["the cat sat on the mat", "a dog"];
        let refs = ["the cat is on the mat", "a dog barks"];
        let p = [7.0 / 8.0, 4.0 / 6.0, 1.0 / 4.0, 1.0 / 6.0];
        let geo = (p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 4.0).exp();
        let bp = (1.0 - 9.0 / 8.0f64).exp();
        let oracle = 100.0 * bp * geo;
        let got = bleu(&hyps, &refs).unwrap();
        assert!((got - oracle).abs() < 0.01, "{got} vs {oracle}");
    }

    #[test]
    fn permutation_invariant_and_monotone() {
        let hyps = ["a b c d e", "x y z", "p q r s"];
        let refs = ["a b c d f", "x y w", "p q r s t"];
        let base = bleu(&hyps, &refs).unwrap();
        let perm_h = [hyps[2], hyps[0], hyps[1]];
        let perm_r = [refs[2], refs[0], refs[1]];
        assert!((bleu(&perm_h, &perm_r).unwrap() - base).abs() < 1e-12);
        let better = [refs[0], hyps[1], hyps[2]];
        assert!(bleu(&better, &refs).unwrap() >= base);
    }

    #[test]
    fn fmeasure_examples() {
        let set = pronoun_set();
        let f = word_fmeasure(&["oui il est ici"], &["oui il est ici"], &set).unwrap();
        assert_eq!((f.target, f.other), (1.0, 1.0));
        let f = word_fmeasure(&["elle"], &["il"], &set).unwrap();
        assert_eq!(f.target, 0.0);
        assert_eq!(f.other_examples, 0);
    }

    #[test]
    fn fmeasure_three_example_enumeration() {
        let set = pronoun_set();
        let hyps = ["il voit elle", "le chat dort", "ils mangent la pomme"];
        let refs = ["elle voit il il", "le chien dort", "elles mangent une pomme"];
        // ex1 target: hyp {il, elle}, ref {elle, il, il}: m = 2, P = 1, R = 2/3, F = 0.8
        //     other: {voit} vs {voit}: 1
        // ex2 target: none on either side, excluded; other: {le, chat, dort} vs {le, chien, dort}: 2/3
        // ex3 target: {ils} vs {elles}: 0; other: {mangent, la, pomme} vs {mangent, une, pomme}: 2/3
        let f = word_fmeasure(&hyps, &refs, &set).unwrap();
        assert_eq!(f.target_examples, 2);
        assert!((f.target - (0.8 + 0.0) / 2.0).abs() < 1e-12);
        assert!((f.other - (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    }
}
