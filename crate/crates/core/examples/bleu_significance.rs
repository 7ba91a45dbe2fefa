//! Corpus BLEU, pronoun f-measure and paired bootstrap between two systems.

use ctxmt::metrics::{bleu, paired_bootstrap, pronoun_set, word_fmeasure};

fn main() -> ctxmt::Result<()> {
    let refs: Vec<String> = ["il mange la pomme", "elle dort ici", "le chat est sur le tapis", "elle voit le chien"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let a: Vec<String> = ["il mange une pomme", "il dort ici", "le chat est sur tapis", "il voit le chien"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let b: Vec<String> = ["il mange la pomme", "elle dort ici", "le chat est sur le tapis", "elle voit un chien"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for (name, hyps) in [("A", &a), ("B", &b)] {
        let f = word_fmeasure(hyps, &refs, &pronoun_set())?;
        println!("{name}: BLEU {:.2}, f-pronoun {:.3}, f-other {:.3}", bleu(hyps, &refs)?, f.target, f.other);
    }
    let p = paired_bootstrap(|h, r| bleu(h, r).unwrap_or(0.0), &a, &b, &refs, 1000, 1)?;
    println!("B beats A in {:.1}% of 1000 resamples", 100.0 * p);
    Ok(())
}
