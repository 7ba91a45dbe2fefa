//! Mapping a rationale example onto the key space of each attention type.

use ctxmt::scat::{normalize_human, AttnType, EncodedScat};
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::{ContextConfig, Vocabulary};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let doc = lang.documents(1, 4, "h")?.remove(0);
    let ex = &doc.example;
    println!("source context: {:?}\ncurrent: {:?} -> {:?}", ex.ctx_src, ex.src, ex.tgt_correct);
    let enc = EncodedScat::new(ex, ContextConfig::default(), &vocab)?;
    println!("source: {}", vocab.decode(&enc.src.ids));
    println!("pronoun query rows: source {}, target {}", enc.query.src, enc.query.tgt);
    for attn in AttnType::ALL {
        let h = enc.projected(attn)?;
        let norm = normalize_human(&h, 1e-6)?;
        let top: Vec<usize> = h.positions().collect();
        println!("{attn}: {} keys, highlighted {:?}, mass {:.6} each", h.len(), top, norm.probs[top[0]]);
    }
    Ok(())
}
