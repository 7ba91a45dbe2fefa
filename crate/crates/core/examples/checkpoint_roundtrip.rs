//! Saving and reloading a trained model reproduces it bit for bit.

use ctxmt::nn::{load_checkpoint, save_checkpoint, Hyperparams};
use ctxmt::synth::{SynthConfig, ToyLanguage};
use ctxmt::text::{ContextConfig, Vocabulary};
use ctxmt::train::{train, Regime, Start, TrainConfig, TrainData};

fn main() -> ctxmt::Result<()> {
    let lang = ToyLanguage::new(SynthConfig::default(), 1)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let docs: Vec<_> = lang.documents(50, 2, "t")?.into_iter().map(|d| d.doc).collect();
    let mut hp = Hyperparams::desk(vocab.len());
    hp.d_model = 32;
    hp.d_ff = 64;
    let cfg = TrainConfig {
        regime: Regime::Baseline,
        steps: 20,
        batch_size: 4,
        warmup: 10,
        ..TrainConfig::default()
    };
    let data = TrainData::new(&docs, &[], &vocab, ContextConfig::default(), &[], cfg.epsilon)?;
    let out = train(Start::Fresh { hp, init_seed: 3 }, &data, &cfg, None)?;
    let dir = std::env::temp_dir().join("ctxmt-checkpoint-example");
    let path = dir.join("model.ckpt");
    save_checkpoint(&out.checkpoint, &path)?;
    let back = load_checkpoint(&path)?;
    println!(
        "{} parameters, step {}, identical after reload: {}",
        back.hp.param_count(),
        back.step,
        back.params == out.checkpoint.params && back.optimizer == out.checkpoint.optimizer
    );
    Ok(())
}
