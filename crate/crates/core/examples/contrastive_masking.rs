//! Contrastive pronoun accuracy of a briefly trained model under the six
//! context-masking ablations.

use ctxmt::eval::{contrastive_accuracy, ContrastivePair, MaskKind, MaskSpec};
use ctxmt::nn::Hyperparams;
use ctxmt::scat::EncodedScat;
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::{ContextConfig, Vocabulary};
use ctxmt::train::{train, Regime, Start, TrainConfig, TrainData};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let ctx = ContextConfig::default();
    let docs = lang.documents(300, 2, "t")?;
    let held = lang.documents(200, 3, "h")?;
    let mut hp = Hyperparams::desk(vocab.len());
    hp.d_model = 64;
    hp.d_ff = 128;
    let cfg = TrainConfig {
        regime: Regime::AttnregRand,
        steps: 150,
        batch_size: 8,
        warmup: 50,
        ..TrainConfig::default()
    };
    let targets = cfg.effective_targets(&hp);
    let data = TrainData::new(
        &docs.iter().map(|d| d.doc.clone()).collect::<Vec<_>>(),
        &docs.iter().map(|d| d.example.clone()).collect::<Vec<_>>(),
        &vocab,
        ctx,
        &targets,
        cfg.epsilon,
    )?;
    let model = train(Start::Fresh { hp, init_seed: 1 }, &data, &cfg, None)?.checkpoint.model()?;
    let pairs: Vec<ContrastivePair> = held
        .iter()
        .map(|d| Ok(ContrastivePair::from_encoded(&d.example.id, EncodedScat::new(&d.example, ctx, &vocab)?)))
        .collect::<ctxmt::Result<_>>()?;
    println!("{:<20} {:>8}", "mask", "accuracy");
    for kind in MaskKind::ablations() {
        let r = contrastive_accuracy(&model, &pairs, &MaskSpec::new(kind, 0))?;
        println!("{:<20} {:>8.1}", kind.label(), 100.0 * r.accuracy);
    }
    Ok(())
}
