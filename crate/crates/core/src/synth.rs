//! A seeded toy language for pronoun disambiguation.
//!
//! Every noun has a fixed grammatical gender in the target language. A
//! document introduces an antecedent noun, follows it with 0 to 4 filler
//! sentences about "he"/"she" (whose translations "il"/"elle" act as
//! distractors), and ends with a sentence starting with "it", translated
//! "il" or "elle" by the gender of the antecedent. The antecedent is thus
//! 1 to 5 sentences back. An optional earlier noun of the opposite gender
//! forces the model to pick the most recent one.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{contrastive_accuracy, ContrastivePair, MaskKind, MaskSpec};
use crate::metrics::{row_scores, Scores};
use crate::nn::{Hyperparams, Model};
use crate::scat::{AttnType, EncodedScat, ScatExample};
use crate::text::{ParallelDocument, Vocabulary};
use crate::train::{train, RegTarget, Regime, Start, TrainConfig, TrainData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub nouns: usize,
    pub verbs: usize,
    /// Maximum antecedent distance in sentences (1..=5).
    pub max_distance: usize,
    /// Probability of an earlier distractor noun of the opposite gender.
    pub p_distractor_noun: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            nouns: 24,
            verbs: 8,
            max_distance: 5,
            p_distractor_noun: 0.5,
        }
    }
}

/// The fixed lexicon of one toy language.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyLanguage {
    pub cfg: SynthConfig,
    /// `true` for feminine.
    pub feminine: Vec<bool>,
}

/// One generated document and its pronoun example.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDocument {
    pub doc: ParallelDocument,
    /// Rationale example for the final sentence, highlights on the
    /// antecedent noun of both sides.
    pub example: ScatExample,
    pub distance: usize,
}

fn noun_src(i: usize) -> String {
    format!("n{i}")
}

fn noun_tgt(i: usize) -> String {
    format!("nom{i}")
}

fn verb_src(i: usize) -> String {
    format!("v{i}")
}

fn verb_tgt(i: usize) -> String {
    format!("verbe{i}")
}

fn pron_tgt(feminine: bool) -> &'static str {
    if feminine {
        "elle"
    } else {
        "il"
    }
}

impl ToyLanguage {
    /// Balanced genders, shuffled by `seed`.
    pub fn new(cfg: SynthConfig, seed: u64) -> Result<Self> {
        if cfg.nouns < 2 || cfg.verbs == 0 {
            return Err(Error::InvalidConfig("toy language needs >= 2 nouns and >= 1 verb".into()));
        }
        if !(1..=5).contains(&cfg.max_distance) {
            return Err(Error::InvalidConfig(format!(
                "max_distance {} outside 1..=5",
                cfg.max_distance
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feminine: Vec<bool> = (0..cfg.nouns).map(|i| i % 2 == 1).collect();
        feminine.shuffle(&mut rng);
        Ok(ToyLanguage { cfg, feminine })
    }

    fn noun_of_gender(&self, rng: &mut ChaCha8Rng, fem: bool) -> usize {
        loop {
            let n = rng.gen_range(0..self.cfg.nouns);
            if self.feminine[n] == fem {
                return n;
            }
        }
    }

    /// Generates one document with id `id`.
    pub fn document(&self, rng: &mut ChaCha8Rng, id: &str) -> Result<ToyDocument> {
        let verb = |rng: &mut ChaCha8Rng| rng.gen_range(0..self.cfg.verbs);
        let distance = rng.gen_range(1..=self.cfg.max_distance);
        let antecedent = rng.gen_range(0..self.cfg.nouns);
        let fem = self.feminine[antecedent];
        let mut pairs: Vec<(String, String)> = Vec::new();
        // keep the distractor inside the five-sentence window
        if distance < 5 && rng.gen_bool(self.cfg.p_distractor_noun) {
            let other = self.noun_of_gender(rng, !fem);
            let v = verb(rng);
            pairs.push((
                format!("{} {}", noun_src(other), verb_src(v)),
                format!("{} {}", noun_tgt(other), verb_tgt(v)),
            ));
        }
        let v = verb(rng);
        pairs.push((
            format!("{} {}", noun_src(antecedent), verb_src(v)),
            format!("{} {}", noun_tgt(antecedent), verb_tgt(v)),
        ));
        for _ in 1..distance {
            let she = rng.gen_bool(0.5);
            let v = verb(rng);
            pairs.push((
                format!("{} {}", if she { "she" } else { "he" }, verb_src(v)),
                format!("{} {}", pron_tgt(she), verb_tgt(v)),
            ));
        }
        let v = verb(rng);
        let src = format!("it {}", verb_src(v));
        let correct = format!("{} {}", pron_tgt(fem), verb_tgt(v));
        let incorrect = format!("{} {}", pron_tgt(!fem), verb_tgt(v));
        let ctx_src: Vec<String> = pairs.iter().map(|p| p.0.clone()).collect();
        let ctx_tgt: Vec<String> = pairs.iter().map(|p| p.1.clone()).collect();
        let off = -(distance as i32);
        let example = ScatExample {
            id: id.to_string(),
            ctx_level: format!("{}+{}", ctx_src.len(), ctx_tgt.len()),
            ctx_src,
            ctx_tgt,
            src: src.clone(),
            tgt_correct: correct.clone(),
            tgt_incorrect: incorrect,
            pron_src_idx: 0,
            pron_tgt_idx: 0,
            hl_src: vec![(off, 0)],
            hl_tgt: vec![(off, 0)],
            confidence: String::new(),
        };
        example.validate()?;
        pairs.push((src, correct));
        Ok(ToyDocument {
            doc: ParallelDocument::new(id, pairs)?,
            example,
            distance,
        })
    }

    /// `n` documents from a stream seeded by `seed`.
    pub fn documents(&self, n: usize, seed: u64, prefix: &str) -> Result<Vec<ToyDocument>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|i| self.document(&mut rng, &format!("{prefix}{i}"))).collect()
    }

    /// Every word of the language, for vocabulary construction.
    pub fn words(&self) -> Vec<String> {
        let mut w: Vec<String> = ["it", "he", "she", "il", "elle"].iter().map(|s| s.to_string()).collect();
        w.extend((0..self.cfg.nouns).flat_map(|i| [noun_src(i), noun_tgt(i)]));
        w.extend((0..self.cfg.verbs).flat_map(|i| [verb_src(i), verb_tgt(i)]));
        w
    }
}

/// Baseline versus attention-regularized training on the toy language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisambiguationConfig {
    pub language: SynthConfig,
    pub language_seed: u64,
    pub train_docs: usize,
    pub heldout_docs: usize,
    pub data_seed: u64,
    pub heldout_seed: u64,
    /// Shared by both runs; the regime is set per run.
    pub train: TrainConfig,
    /// Held-out examples used for attention alignment.
    pub alignment_examples: usize,
    pub random_mask_p: f64,
}

impl Default for DisambiguationConfig {
    fn default() -> Self {
        DisambiguationConfig {
            language: SynthConfig::default(),
            language_seed: 1,
            train_docs: 2000,
            heldout_docs: 500,
            data_seed: 2,
            heldout_seed: 3,
            train: TrainConfig {
                steps: 1000,
                warmup: 200,
                ..TrainConfig::default()
            },
            alignment_examples: 200,
            random_mask_p: 0.1,
        }
    }
}

/// Held-out measurements of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regime: Regime,
    pub accuracy: f64,
    pub supporting_mask_accuracy: f64,
    pub random_mask_accuracy: f64,
    /// Scores of the monitored row before and after training.
    pub before: Scores,
    pub after: Scores,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disambiguation {
    /// The regularized row monitored in both runs.
    pub monitored: RegTarget,
    pub baseline: RunSummary,
    pub regularized: RunSummary,
}

/// Trains the baseline and attnreg-rand from the same initialization and
/// batch stream and evaluates both on held-out contrastive pairs.
///
/// The monitored row is the first regularization target of attnreg-rand
/// of type dec-cross, else its first target.
pub fn run_disambiguation(cfg: &DisambiguationConfig, hp: Option<Hyperparams>) -> Result<Disambiguation> {
    let lang = ToyLanguage::new(cfg.language, cfg.language_seed)?;
    let vocab = Vocabulary::from_words(lang.words())?;
    let hp = hp.unwrap_or_else(|| Hyperparams::desk(vocab.len()));
    let train_docs = lang.documents(cfg.train_docs, cfg.data_seed, "train")?;
    let heldout = lang.documents(cfg.heldout_docs, cfg.heldout_seed, "heldout")?;
    let ctx = cfg.train.context;
    let docs: Vec<ParallelDocument> = train_docs.iter().map(|d| d.doc.clone()).collect();
    let examples: Vec<ScatExample> = train_docs.iter().map(|d| d.example.clone()).collect();
    let encoded: Vec<EncodedScat> = heldout
        .iter()
        .map(|d| EncodedScat::new(&d.example, ctx, &vocab))
        .collect::<Result<_>>()?;
    let pairs: Vec<ContrastivePair> = heldout
        .iter()
        .zip(&encoded)
        .map(|(d, e)| ContrastivePair::from_encoded(&d.example.id, e.clone()))
        .collect();
    let probe = &encoded[..cfg.alignment_examples.min(encoded.len())];

    let reg_cfg = TrainConfig {
        regime: Regime::AttnregRand,
        ..cfg.train.clone()
    };
    let reg_targets = reg_cfg.effective_targets(&hp);
    let monitored = *reg_targets
        .iter()
        .find(|t| t.attn == AttnType::DecCross)
        .or(reg_targets.first())
        .ok_or_else(|| Error::InvalidConfig("no regularization target".into()))?;
    let measure = |m: &Model| -> Result<Scores> {
        row_scores(m, probe, monitored.attn, monitored.layer, monitored.heads, cfg.train.epsilon)?
            .ok_or(Error::NoHighlights)
    };

    let run = |regime: Regime| -> Result<RunSummary> {
        let tc = TrainConfig {
            regime,
            ..cfg.train.clone()
        };
        let (lambda, _) = tc.effective_mix();
        let targets = if lambda > 0.0 { tc.effective_targets(&hp) } else { Vec::new() };
        let data = TrainData::new(&docs, &examples, &vocab, ctx, &targets, tc.epsilon)?;
        let init = Model::init(hp.clone(), tc.seed)?;
        let before = measure(&init)?;
        let out = train(
            Start::Fresh {
                hp: hp.clone(),
                init_seed: tc.seed,
            },
            &data,
            &tc,
            None,
        )?;
        let model = out.checkpoint.model()?;
        let acc = |kind: MaskKind| -> Result<f64> {
            Ok(contrastive_accuracy(&model, &pairs, &MaskSpec::new(kind, tc.seed))?.accuracy)
        };
        Ok(RunSummary {
            regime,
            accuracy: acc(MaskKind::None)?,
            supporting_mask_accuracy: acc(MaskKind::Supporting)?,
            random_mask_accuracy: acc(MaskKind::Random(cfg.random_mask_p))?,
            before,
            after: measure(&model)?,
            final_loss: out.report.steps.last().map_or(f64::NAN, |s| s.loss),
        })
    };
    let baseline = run(Regime::Baseline)?;
    let regularized = run(Regime::AttnregRand)?;
    Ok(Disambiguation {
        monitored,
        baseline,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::ContextConfig;

    #[test]
    fn pronoun_follows_antecedent_gender() {
        let lang = ToyLanguage::new(SynthConfig::default(), 3).unwrap();
        assert_eq!(lang.feminine.iter().filter(|&&f| f).count(), 12);
        for d in lang.documents(200, 9, "d").unwrap() {
            let ex = &d.example;
            assert!((1..=5).contains(&d.distance));
            let ante = ex.sentence(crate::scat::Side::Target, -(d.distance as i32)).unwrap();
            let noun: usize = ante.split(' ').next().unwrap()[3..].parse().unwrap();
            assert_eq!(ex.tgt_correct.starts_with("elle"), lang.feminine[noun]);
            assert_ne!(ex.tgt_correct, ex.tgt_incorrect);
            assert!(ex.ctx_src.len() <= 5);
            assert_eq!(d.doc.len(), ex.ctx_src.len() + 1);
        }
    }

    #[test]
    fn deterministic_and_encodable() {
        let lang = ToyLanguage::new(SynthConfig::default(), 3).unwrap();
        let a = lang.documents(20, 4, "x").unwrap();
        assert_eq!(a, lang.documents(20, 4, "x").unwrap());
        let vocab = Vocabulary::from_words(lang.words()).unwrap();
        for d in &a {
            let enc = EncodedScat::new(&d.example, ContextConfig::default(), &vocab).unwrap();
            for attn in AttnType::ALL {
                assert_eq!(enc.projected(attn).unwrap().count(), 1);
            }
        }
    }
}
