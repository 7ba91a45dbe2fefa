//! Paired bootstrap resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MIN_RESAMPLES: usize = 100;

/// Fraction of resamples in which system B scores higher than system A
/// under `metric(hyps, refs)`; ties count one half. Every resample draws
/// `refs.len()` sentence indices with replacement, shared by both systems.
pub fn paired_bootstrap<F>(
    metric: F,
    hyps_a: &[String],
    hyps_b: &[String],
    refs: &[String],
    resamples: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&[String], &[String]) -> f64,
{
    if hyps_a.len() != refs.len() || hyps_b.len() != refs.len() {
        return Err(Error::LengthMismatch {
            left: hyps_a.len().max(hyps_b.len()),
            right: refs.len(),
        });
    }
    if refs.is_empty() {
        return Err(Error::EmptyDataset("reference set"));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = refs.len();
    let mut wins = 0.0;
    let (mut sa, mut sb, mut sr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..resamples {
        sa.clear();
        sb.clear();
        sr.clear();
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            sa.push(hyps_a[i].clone());
            sb.push(hyps_b[i].clone());
            sr.push(refs[i].clone());
        }
        let a = metric(&sa, &sr);
        let b = metric(&sb, &sr);
        if b > a {
            wins += 1.0;
        } else if b == a {
            wins += 0.5;
        }
    }
    Ok(wins / resamples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::bleu;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn corpus_bleu(h: &[String], r: &[String]) -> f64 {
        bleu(h, r).unwrap()
    }

    #[test]
    fn symmetric_and_dominant() {
        let refs = s(&["a b c d", "e f g h", "i j k l", "m n o p"]);
        let a = s(&["a b x d", "e y g h", "i j k z", "m n q p"]);
        assert_eq!(paired_bootstrap(corpus_bleu, &a, &a, &refs, 200, 1).unwrap(), 0.5);
        let p = paired_bootstrap(corpus_bleu, &a, &refs, &refs, 500, 1).unwrap();
        assert_eq!(p, 1.0);
        let q = paired_bootstrap(corpus_bleu, &refs, &a, &refs, 500, 1).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn seed_fixed_rerun_is_identical() {
        let refs = s(&["a b c d", "e f g h", "i j k l"]);
        let a = s(&["a b c x", "e f g h", "i x k l"]);
        let b = s(&["a b c d", "e f x h", "i j x l"]);
        let one = paired_bootstrap(corpus_bleu, &a, &b, &refs, 1000, 7).unwrap();
        let two = paired_bootstrap(corpus_bleu, &a, &b, &refs, 1000, 7).unwrap();
        assert_eq!(one.to_bits(), two.to_bits());
        assert!(paired_bootstrap(corpus_bleu, &a, &b, &refs, 50, 7).is_err());
        assert!(paired_bootstrap(corpus_bleu, &a[..2], &b, &refs, 100, 7).is_err());
    }
}
