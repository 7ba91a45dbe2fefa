//! Layer/head alignment sweep of an untrained model against toy rationales,
//! with the uniform-attention reference row.

use ctxmt::metrics::{sweep, HeadMode, Metric};
use ctxmt::nn::{Hyperparams, Model};
use ctxmt::scat::{AttnType, EncodedScat};
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::{ContextConfig, Vocabulary};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let examples: Vec<EncodedScat> = lang
        .documents(200, 7, "a")?
        .iter()
        .map(|d| EncodedScat::new(&d.example, ContextConfig::default(), &vocab))
        .collect::<ctxmt::Result<_>>()?;
    let model = Model::init(Hyperparams::desk(vocab.len()), 1)?;
    let report = sweep(&model, &examples, HeadMode::PerHead, 1e-6)?;
    print!("{}", report.to_table());
    for attn in AttnType::ALL {
        if let Some(c) = report.argbest(Metric::Dot, attn) {
            println!("best dot for {attn}: layer {} {:?} = {:.3}", c.layer, c.heads, c.scores.dot);
        }
    }
    Ok(())
}
