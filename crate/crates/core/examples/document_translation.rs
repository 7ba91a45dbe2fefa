//! Document translation with gold and with self-generated target context,
//! scored with BLEU and pronoun/other word f-measure.

use ctxmt::eval::{translate_document, ContextMode, DecodeConfig};
use ctxmt::metrics::{bleu, pronoun_set, word_fmeasure};
use ctxmt::nn::{DecodeMethod, Hyperparams};
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::{ContextConfig, ParallelDocument, Vocabulary};
use ctxmt::train::{train, Regime, Start, TrainConfig, TrainData};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let ctx = ContextConfig::new(1, 1);
    let docs: Vec<ParallelDocument> = lang.documents(300, 2, "t")?.into_iter().map(|d| d.doc).collect();
    let test: Vec<ParallelDocument> = lang.documents(10, 4, "x")?.into_iter().map(|d| d.doc).collect();
    let mut hp = Hyperparams::desk(vocab.len());
    hp.d_model = 64;
    hp.d_ff = 128;
    let cfg = TrainConfig {
        regime: Regime::Baseline,
        steps: 150,
        batch_size: 8,
        warmup: 50,
        context: ctx,
        ..TrainConfig::default()
    };
    let data = TrainData::new(&docs, &[], &vocab, ctx, &[], cfg.epsilon)?;
    let model = train(Start::Fresh { hp, init_seed: 1 }, &data, &cfg, None)?.checkpoint.model()?;
    let dc = DecodeConfig {
        method: DecodeMethod::Beam(3),
        max_len: 20,
    };
    let refs: Vec<String> = test.iter().flat_map(|d| d.targets().map(str::to_string).collect::<Vec<_>>()).collect();
    for mode in [ContextMode::Gold, ContextMode::NonGold] {
        let mut hyps = Vec::new();
        for doc in &test {
            for h in translate_document(&model, doc, ctx, mode, dc, &vocab)? {
                hyps.push(vocab.decode(&h));
            }
        }
        let f = word_fmeasure(&hyps, &refs, &pronoun_set())?;
        println!(
            "{mode:?}: BLEU {:.2}, f-pronoun {:.3}, f-other {:.3}; first: {:?}",
            bleu(&hyps, &refs)?,
            f.target,
            f.other,
            hyps[0]
        );
    }
    Ok(())
}
