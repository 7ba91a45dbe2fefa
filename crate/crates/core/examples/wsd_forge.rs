//! Forging a word-sense contrastive set from a tiny aligned corpus.

use ctxmt::wsd;

fn main() -> ctxmt::Result<()> {
    let mut text = String::from("### doc kitchen\n");
    let mut links = String::new();
    for i in 0..40 {
        let (word, lemma) = if i % 2 == 0 { ("clou", "clou") } else { ("ongle", "ongle") };
        text.push_str(&format!("the|the|DET nail|nail|NOUN\tle|le|DET {word}|{lemma}|NOUN\n"));
        links.push_str("0-0 1-1\n");
    }
    let docs = wsd::parse_annotations(&text)?;
    let aligns = wsd::parse_alignments(&links)?;
    let table = wsd::accumulate_counts(&docs, &aligns)?;
    let groups = wsd::extract_groups(&table, 10, 2, wsd::DEFAULT_Z);
    print!("{}", wsd::review_template(&groups));
    let review = wsd::parse_review("nail NOUN non-synonymous\n")?;
    let groups = wsd::apply_review(groups, &review);
    let out = wsd::make_contrastive(&docs, &aligns, &groups, &table, wsd::DEFAULT_WINDOW)?;
    println!("{} pairs; first: {:?} vs {:?}", out.pairs.len(), out.pairs[0].tgt_correct, out.pairs[0].tgt_incorrect);
    Ok(())
}
