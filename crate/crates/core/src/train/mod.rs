//! Training: MT loss, attention regularization toward human rationales,
//! rationale-batch mixing and the three training regimes.
//!
//! The minimized objective on a rationale batch is
//! `L_MT + lambda * sum_targets KL(human || model_row) / source_len`;
//! other batches use `L_MT` alone.

mod optim;

pub use optim::{adam_step, lr_at_step, OptimizerState, ADAM_EPS, BETA1, BETA2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::loss_targets;
use crate::nn::tape::kl_divergence;
use crate::nn::{decoder_io, Checkpoint, DropoutRng, ForwardTrace, HeadSelection, Hyperparams, Model, Parameters, Tape, Var};
use crate::scat::{normalize_human, AttnType, EncodedScat, ScatExample, DEFAULT_EPSILON};
use crate::text::{concat_context, ContextConfig, ParallelDocument, TokenId, Vocabulary};

/// One attention distribution pulled toward the human rationale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegTarget {
    pub attn: AttnType,
    /// 0 is the bottom layer (closest to the input).
    pub layer: usize,
    #[serde(default = "first_head")]
    pub heads: HeadSelection,
}

fn first_head() -> HeadSelection {
    HeadSelection::First
}

impl RegTarget {
    pub fn new(attn: AttnType, layer: usize) -> Self {
        RegTarget {
            attn,
            layer,
            heads: HeadSelection::First,
        }
    }

    pub fn validate(&self, hp: &Hyperparams) -> Result<()> {
        let layers = hp.layers(self.attn);
        if self.layer >= layers {
            return Err(Error::InvalidConfig(format!(
                "{} layer {} but the stack has {layers} layers",
                self.attn, self.layer
            )));
        }
        if let HeadSelection::Head(h) = self.heads {
            if h >= hp.heads {
                return Err(Error::InvalidConfig(format!("head {h} of {}", hp.heads)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Baseline,
    AttnregRand,
    AttnregPre,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Baseline => "baseline",
            Regime::AttnregRand => "attnreg-rand",
            Regime::AttnregPre => "attnreg-pre",
        }
    }

    /// Default regularized rows: from scratch, the top encoder self-attention,
    /// top decoder cross-attention and bottom decoder self-attention; after
    /// pretraining, the top decoder self-attention.
    pub fn default_targets(self, hp: &Hyperparams) -> Vec<RegTarget> {
        match self {
            Regime::Baseline => Vec::new(),
            Regime::AttnregRand => vec![
                RegTarget::new(AttnType::EncSelf, hp.enc_layers - 1),
                RegTarget::new(AttnType::DecCross, hp.dec_layers - 1),
                RegTarget::new(AttnType::DecSelf, 0),
            ],
            Regime::AttnregPre => vec![RegTarget::new(AttnType::DecSelf, hp.dec_layers - 1)],
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Regime::Baseline),
            "attnreg-rand" => Ok(Regime::AttnregRand),
            "attnreg-pre" => Ok(Regime::AttnregPre),
            other => Err(Error::InvalidConfig(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Missing fields take their defaults.
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub regime: Regime,
    /// Regularization weight; forced to 0 by the baseline regime.
    pub lambda: f64,
    /// Probability of drawing a rationale batch; forced to 0 by the baseline regime.
    pub p_scat: f64,
    /// Empty means the regime's default targets.
    #[serde(default)]
    pub targets: Vec<RegTarget>,
    pub batch_size: usize,
    pub steps: u64,
    pub warmup: u64,
    /// Multiplier on the warmup schedule.
    #[serde(default = "one")]
    pub lr_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn one() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            regime: Regime::AttnregRand,
            lambda: 10.0,
            p_scat: 0.2,
            targets: Vec::new(),
            batch_size: 16,
            steps: 1000,
            warmup: 4000,
            lr_scale: 1.0,
            seed: 1,
            context: ContextConfig::default(),
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.p_scat) {
            return bad(format!("p_scat {} outside [0, 1]", self.p_scat));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.warmup == 0 {
            return bad("warmup must be >= 1".into());
        }
        if !(self.lr_scale > 0.0) {
            return bad(format!("lr_scale {} must be > 0", self.lr_scale));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon {} must be >= 0", self.epsilon));
        }
        Ok(())
    }

    /// `(lambda, p_scat)` after applying the regime.
    pub fn effective_mix(&self) -> (f64, f64) {
        match self.regime {
            Regime::Baseline => (0.0, 0.0),
            _ => (self.lambda, self.p_scat),
        }
    }

    pub fn effective_targets(&self, hp: &Hyperparams) -> Vec<RegTarget> {
        if self.targets.is_empty() {
            self.regime.default_targets(hp)
        } else {
            self.targets.clone()
        }
    }
}

/// One regularized attention row: which row, and the normalized human
/// distribution over its visible keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RegTerm {
    pub target: RegTarget,
    pub row: usize,
    pub human: Vec<f64>,
}

/// Everything needed to evaluate the regularizer for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPlan {
    pub terms: Vec<RegTerm>,
    /// The loss of every term is divided by this (the source length).
    pub input_len: usize,
}

impl RegPlan {
    /// Targets whose projected human vector is empty are dropped; if all
    /// are, the example is unusable.
    pub fn new(ex: &EncodedScat, targets: &[RegTarget], epsilon: f64) -> Result<RegPlan> {
        let mut terms = Vec::with_capacity(targets.len());
        for &target in targets {
            let projected = match ex.projected(target.attn) {
                Ok(p) => p,
                Err(Error::NoHighlights) => continue,
                Err(e) => return Err(e),
            };
            let row = match target.attn {
                AttnType::EncSelf => ex.query.src,
                AttnType::DecCross | AttnType::DecSelf => ex.query.tgt,
            };
            let human = normalize_human(&projected, epsilon)?.probs;
            terms.push(RegTerm { target, row, human });
        }
        if terms.is_empty() {
            return Err(Error::UnusableExample);
        }
        Ok(RegPlan {
            terms,
            input_len: ex.src.len(),
        })
    }

    /// Regularizer value from recorded attention maps.
    pub fn evaluate(&self, trace: &ForwardTrace) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let row = trace.attention_row(t.target.attn, t.target.layer, t.target.heads, t.row, t.human.len());
                kl_divergence(&t.human, &row)
            })
            .sum::<f64>()
            / self.input_len as f64
    }
}

/// `sum_targets KL(human || model_row) / source_len` for one example;
/// `lambda` is applied by the caller.
pub fn attnreg_loss(trace: &ForwardTrace, ex: &EncodedScat, targets: &[RegTarget], epsilon: f64) -> Result<f64> {
    Ok(RegPlan::new(ex, targets, epsilon)?.evaluate(trace))
}

/// The training objective of one example recorded on a tape.
pub struct Objective {
    pub total: Var,
    pub params: Vec<Var>,
    pub mt: f64,
    pub reg: f64,
}

/// Records `L_MT(y) + lambda * R` (the second term only with a plan).
pub fn record_objective<'p>(
    tape: &mut Tape<'p>,
    model: &'p Model,
    src: &[TokenId],
    y: &[TokenId],
    reg: Option<(&RegPlan, f64)>,
    drop: Option<DropoutRng<'_>>,
) -> Result<Objective> {
    let (tgt_in, tgt_out) = decoder_io(y);
    let rec = model.record(tape, src, &tgt_in, drop)?;
    let rows = loss_targets(&tgt_out, 0..tgt_out.len())?;
    let mt = tape.smoothed_nll(rec.logp, &rows, model.hp.label_smoothing);
    let mt_value = tape.scalar(mt);
    let mut parts = vec![mt];
    let mut reg_value = 0.0;
    if let Some((plan, lambda)) = reg {
        let weight = 1.0 / plan.input_len as f64;
        for term in &plan.terms {
            let t = term.target;
            term.target.validate(&model.hp)?;
            let heads = rec.attention.heads(t.attn, t.layer, t.heads);
            let kl = tape.kl_row(&heads, term.row, term.human.clone(), weight);
            reg_value += tape.scalar(kl);
            parts.push(tape.scale(kl, lambda));
        }
    }
    let total = if parts.len() == 1 { parts[0] } else { tape.sum(&parts) };
    Ok(Objective {
        total,
        params: rec.params,
        mt: mt_value,
        reg: reg_value,
    })
}

/// A rationale example ready for training.
#[derive(Debug, Clone)]
pub struct ScatItem {
    pub encoded: EncodedScat,
    pub plan: RegPlan,
}

/// Tokenized training material.
#[derive(Debug, Clone, Default)]
pub struct TrainData {
    /// Concatenated `(source, target)` pairs, one per document sentence.
    pub mt: Vec<(Vec<TokenId>, Vec<TokenId>)>,
    pub scat: Vec<ScatItem>,
    /// Rationale examples dropped as unusable for the chosen targets.
    pub skipped_scat: usize,
}

impl TrainData {
    pub fn new(
        docs: &[ParallelDocument],
        scat: &[ScatExample],
        vocab: &Vocabulary,
        ctx: ContextConfig,
        targets: &[RegTarget],
        epsilon: f64,
    ) -> Result<TrainData> {
        let mut mt = Vec::new();
        for doc in docs {
            for j in 0..doc.len() {
                let (s, t) = concat_context(doc, j, ctx, vocab)?;
                if !s.is_empty() && !t.is_empty() {
                    mt.push((s.ids, t.ids));
                }
            }
        }
        let mut items = Vec::new();
        let mut skipped = 0;
        for ex in scat {
            let encoded = EncodedScat::new(ex, ctx, vocab)?;
            if targets.is_empty() {
                // regularization is off; keep the example for its MT loss
                items.push(ScatItem {
                    encoded,
                    plan: RegPlan {
                        terms: Vec::new(),
                        input_len: 1,
                    },
                });
                continue;
            }
            match RegPlan::new(&encoded, targets, epsilon) {
                Ok(plan) => items.push(ScatItem { encoded, plan }),
                Err(Error::UnusableExample) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(TrainData {
            mt,
            scat: items,
            skipped_scat: skipped,
        })
    }
}

/// Draws batch kinds and example indices from one seeded stream.
pub struct BatchSampler {
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        BatchSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// True for a rationale batch. One uniform draw is consumed regardless
    /// of `p`, so runs with `p = 0` follow the same stream.
    pub fn draw_scat(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub lr: f64,
    pub scat_batch: bool,
    /// Batch mean of the objective.
    pub loss: f64,
    pub mt_loss: f64,
    /// Batch mean of the unweighted regularizer (rationale batches only).
    pub reg_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub regime: Regime,
    pub lambda: f64,
    pub p_scat: f64,
    pub targets: Vec<RegTarget>,
    pub seed: u64,
    pub skipped_scat: usize,
    pub steps: Vec<StepRecord>,
}

impl TrainReport {
    pub fn scat_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.scat_batch).count() as f64 / self.steps.len() as f64
    }
}

/// Where training starts.
pub enum Start {
    Fresh { hp: Hyperparams, init_seed: u64 },
    Pretrained(Box<Checkpoint>),
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
}

const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Runs `cfg.steps` optimizer steps.
///
/// `on_step` sees the model after every update (for monitoring).
pub fn train(
    start: Start,
    data: &TrainData,
    cfg: &TrainConfig,
    mut on_step: Option<&mut dyn FnMut(&StepRecord, &Model)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut model = match (start, cfg.regime) {
        (Start::Fresh { .. }, Regime::AttnregPre) => {
            return Err(Error::InvalidConfig(
                "regime attnreg-pre requires a pretrained checkpoint".into(),
            ))
        }
        (Start::Fresh { hp, init_seed }, _) => Model::init(hp, init_seed)?,
        (Start::Pretrained(c), _) => c.model()?,
    };
    let (lambda, p_scat) = cfg.effective_mix();
    let targets = if lambda > 0.0 {
        cfg.effective_targets(&model.hp)
    } else {
        Vec::new()
    };
    for t in &targets {
        t.validate(&model.hp)?;
    }
    if p_scat < 1.0 && data.mt.is_empty() {
        return Err(Error::EmptyDataset("MT corpus"));
    }
    if p_scat > 0.0 && data.scat.is_empty() {
        return Err(Error::EmptyDataset("rationale set"));
    }
    if lambda > 0.0 && data.scat.iter().any(|s| s.plan.terms.is_empty()) {
        return Err(Error::InvalidConfig(
            "training data was prepared without regularization targets".into(),
        ));
    }

    let mut opt = OptimizerState::new(&model.params);
    let mut sampler = BatchSampler::new(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM);
    let mut records = Vec::with_capacity(cfg.steps as usize);
    let inv_b = 1.0 / cfg.batch_size as f64;

    for step in 1..=cfg.steps {
        let lr = cfg.lr_scale * lr_at_step(step, model.hp.d_model, cfg.warmup)?;
        let scat_batch = sampler.draw_scat(p_scat);
        let mut grads: Option<Parameters> = None;
        let (mut loss, mut mt_sum, mut reg_sum) = (0.0, 0.0, 0.0);
        for _ in 0..cfg.batch_size {
            let (src, y, plan) = if scat_batch {
                let item = &data.scat[sampler.index(data.scat.len())];
                let plan = (lambda > 0.0).then_some((&item.plan, lambda));
                (&item.encoded.src.ids, &item.encoded.tgt.ids, plan)
            } else {
                let (s, t) = &data.mt[sampler.index(data.mt.len())];
                (s, t, None)
            };
            let drop = (model.hp.dropout > 0.0).then(|| DropoutRng {
                rate: model.hp.dropout,
                rng: &mut drop_rng,
            });
            let mut tape = Tape::new();
            let obj = record_objective(&mut tape, &model, src, y, plan, drop)?;
            let total = tape.scalar(obj.total);
            loss += total * inv_b;
            mt_sum += obj.mt * inv_b;
            reg_sum += obj.reg * inv_b;
            let mut g = tape.backward(obj.total);
            let mut ex_grads = model.collect_grads(&mut g, &obj.params);
            ex_grads.scale(inv_b);
            match &mut grads {
                Some(acc) => acc.add_assign(&ex_grads),
                None => grads = Some(ex_grads),
            }
        }
        let grads = grads.expect("batch_size >= 1");
        let diverged = |step: u64, model: &Model, opt: &OptimizerState| Error::Diverged {
            step: step as usize,
            last_good: Box::new(Checkpoint::from_model(model, Some(opt.clone()), cfg.seed, step - 1)),
        };
        if !loss.is_finite() || !grads.all_finite() {
            return Err(diverged(step, &model, &opt));
        }
        let before = opt.clone();
        let saved = model.params.clone();
        adam_step(&mut model.params, &grads, &mut opt, lr)?;
        if !model.params.all_finite() {
            model.params = saved;
            return Err(diverged(step, &model, &before));
        }
        let rec = StepRecord {
            step,
            lr,
            scat_batch,
            loss,
            mt_loss: mt_sum,
            reg_loss: (scat_batch && lambda > 0.0).then_some(reg_sum),
        };
        if let Some(f) = on_step.as_mut() {
            f(&rec, &model);
        }
        records.push(rec);
    }

    let report = TrainReport {
        regime: cfg.regime,
        lambda,
        p_scat,
        targets,
        seed: cfg.seed,
        skipped_scat: data.skipped_scat,
        steps: records,
    };
    Ok(TrainOutcome {
        checkpoint: Checkpoint::from_model(&model, Some(opt), cfg.seed, cfg.steps),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AttentionMaps, Mat};
    use crate::text::Vocabulary;

    fn vocab() -> Vocabulary {
        Vocabulary::from_words(["a", "b", "c", "d", "x", "y", "z", "w"]).unwrap()
    }

    fn scat_example() -> ScatExample {
        ScatExample {
            id: "t".into(),
            ctx_src: vec![],
            ctx_tgt: vec![],
            src: "a b c d".into(),
            tgt_correct: "x y z w".into(),
            tgt_incorrect: "x y a w".into(),
            pron_src_idx: 1,
            pron_tgt_idx: 2,
            hl_src: vec![(0, 0), (0, 2)],
            hl_tgt: vec![(0, 0)],
            ctx_level: "0+0".into(),
            confidence: String::new(),
        }
    }

    fn uniform_trace(src: usize, tgt_in: usize, layers: usize, heads: usize) -> ForwardTrace {
        let uni = |r: usize, c: usize, causal: bool| -> Mat {
            let mut m = Mat::zeros(r, c);
            for i in 0..r {
                let n = if causal { i + 1 } else { c };
                for j in 0..n {
                    *m.at_mut(i, j) = 1.0 / n as f64;
                }
            }
            m
        };
        let maps = |r, c, causal| (0..layers).map(|_| (0..heads).map(|_| uni(r, c, causal)).collect()).collect();
        ForwardTrace {
            attention: AttentionMaps {
                enc_self: maps(src, src, false),
                dec_cross: maps(tgt_in, src, false),
                dec_self: maps(tgt_in, tgt_in, true),
            },
            enc_states: Mat::zeros(src, 4),
            logprobs: Mat::zeros(tgt_in, 4),
        }
    }

    #[test]
    fn spot_value_uniform_row() {
        let ex = EncodedScat::new(&scat_example(), ContextConfig::new(0, 0), &vocab()).unwrap();
        let trace = uniform_trace(4, 5, 2, 2);
        let loss = attnreg_loss(&trace, &ex, &[RegTarget::new(AttnType::DecCross, 1)], 1e-6).unwrap();
        // direct summation: two entries (1 - 2e-6) / 2 against 1/4, two entries 1e-6 against 1/4
        let hi = (1.0 - 2e-6) / 2.0;
        let kl = 2.0 * hi * (hi / 0.25f64).ln() + 2.0 * 1e-6 * (1e-6 / 0.25f64).ln();
        assert!((kl - 0.6931).abs() < 1e-3);
        assert!((loss - kl / 4.0).abs() < 1e-12);
        assert!((loss - 0.1733).abs() < 1e-3);
    }

    #[test]
    fn identical_rows_give_zero_and_targets_add() {
        let ex = EncodedScat::new(&scat_example(), ContextConfig::new(0, 0), &vocab()).unwrap();
        let t = RegTarget::new(AttnType::DecCross, 0);
        let plan = RegPlan::new(&ex, &[t], 1e-6).unwrap();
        let mut trace = uniform_trace(4, 5, 1, 1);
        trace.attention.dec_cross[0][0].row_mut(2).copy_from_slice(&plan.terms[0].human);
        assert!(attnreg_loss(&trace, &ex, &[t], 1e-6).unwrap() <= 1e-9);
        let trace = uniform_trace(4, 5, 1, 1);
        let one = attnreg_loss(&trace, &ex, &[t], 1e-6).unwrap();
        let two = attnreg_loss(&trace, &ex, &[t, t], 1e-6).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn projection_rows_and_unusable() {
        let ex = EncodedScat::new(&scat_example(), ContextConfig::new(0, 0), &vocab()).unwrap();
        let plan = RegPlan::new(
            &ex,
            &[RegTarget::new(AttnType::EncSelf, 0), RegTarget::new(AttnType::DecSelf, 0)],
            1e-6,
        )
        .unwrap();
        assert_eq!(plan.terms[0].row, 1);
        assert_eq!(plan.terms[0].human.len(), 4);
        // decoder row 2 sees <bos>, x, y; x is highlighted
        assert_eq!(plan.terms[1].row, 2);
        assert_eq!(plan.terms[1].human.len(), 3);
        assert!(plan.terms[1].human[1] > 0.9);
        let mut bare = scat_example();
        bare.hl_src.clear();
        bare.hl_tgt.clear();
        let ex = EncodedScat::new(&bare, ContextConfig::new(0, 0), &vocab()).unwrap();
        let err = RegPlan::new(&ex, &[RegTarget::new(AttnType::DecCross, 0)], 1e-6).unwrap_err();
        assert_eq!(err.to_string(), "unusable SCAT example");
    }

    #[test]
    fn sampler_fraction_concentrates() {
        let mut s = BatchSampler::new(2024);
        let hits = (0..10_000).filter(|_| s.draw_scat(0.2)).count();
        // binomial sd is 0.004; 0.01 is 2.5 sd
        assert!((hits as f64 / 10_000.0 - 0.2).abs() < 0.01, "{hits}");
    }

    fn tiny_hp(v: usize) -> Hyperparams {
        Hyperparams {
            enc_layers: 1,
            dec_layers: 1,
            heads: 2,
            d_model: 8,
            d_ff: 16,
            dropout: 0.1,
            label_smoothing: 0.1,
            max_len: 32,
            src_vocab: v,
            tgt_vocab: v,
        }
    }

    fn toy_data(targets: &[RegTarget]) -> TrainData {
        let v = vocab();
        let doc = ParallelDocument::new(
            "d",
            vec![("a b".into(), "x y".into()), ("c d".into(), "z w".into())],
        )
        .unwrap();
        TrainData::new(&[doc], &[scat_example()], &v, ContextConfig::new(1, 1), targets, 1e-6).unwrap()
    }

    #[test]
    fn lambda_zero_matches_baseline_bit_for_bit() {
        let hp = tiny_hp(vocab().len());
        let cfg = TrainConfig {
            regime: Regime::Baseline,
            batch_size: 2,
            steps: 12,
            warmup: 4,
            seed: 5,
            ..TrainConfig::default()
        };
        let data = toy_data(&[]);
        let run = |cfg: &TrainConfig| {
            train(Start::Fresh { hp: hp.clone(), init_seed: 3 }, &data, cfg, None).unwrap()
        };
        let base = run(&cfg);
        let zero = run(&TrainConfig {
            regime: Regime::AttnregRand,
            lambda: 0.0,
            p_scat: 0.0,
            ..cfg.clone()
        });
        assert_eq!(base.checkpoint, zero.checkpoint);
        assert_eq!(base.report.steps, zero.report.steps);
        assert_eq!(base.report.lambda, 0.0);
        assert_ne!(base.checkpoint.params, Model::init(hp.clone(), 3).unwrap().params);
    }

    #[test]
    fn regularized_runs_are_deterministic() {
        let hp = tiny_hp(vocab().len());
        let targets = Regime::AttnregRand.default_targets(&hp);
        let data = toy_data(&targets);
        let cfg = TrainConfig {
            batch_size: 2,
            steps: 10,
            warmup: 4,
            p_scat: 0.5,
            ..TrainConfig::default()
        };
        let a = train(Start::Fresh { hp: hp.clone(), init_seed: 1 }, &data, &cfg, None).unwrap();
        let b = train(Start::Fresh { hp: hp.clone(), init_seed: 1 }, &data, &cfg, None).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert!(a.report.steps.iter().any(|s| s.reg_loss.is_some()));
    }

    #[test]
    fn pre_regime_needs_checkpoint_and_datasets_must_exist() {
        let hp = tiny_hp(vocab().len());
        let cfg = TrainConfig {
            regime: Regime::AttnregPre,
            ..TrainConfig::default()
        };
        let data = toy_data(&Regime::AttnregPre.default_targets(&hp));
        let err = train(Start::Fresh { hp: hp.clone(), init_seed: 1 }, &data, &cfg, None).err().unwrap();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let empty = TrainData::default();
        let cfg = TrainConfig { regime: Regime::Baseline, ..TrainConfig::default() };
        let err = train(Start::Fresh { hp, init_seed: 1 }, &empty, &cfg, None).err().unwrap();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn divergence_returns_last_good_checkpoint() {
        let mut hp = tiny_hp(vocab().len());
        hp.dropout = 0.0;
        let data = toy_data(&[]);
        let mut model = Model::init(hp.clone(), 1).unwrap();
        let last = model.params.tensors.len() - 1;
        model.params.tensors[last].data[0] = f64::NAN;
        let ck = Checkpoint::from_model(&model, None, 0, 0);
        let cfg = TrainConfig {
            regime: Regime::Baseline,
            batch_size: 1,
            steps: 3,
            warmup: 2,
            ..TrainConfig::default()
        };
        match train(Start::Pretrained(Box::new(ck)), &data, &cfg, None) {
            Err(Error::Diverged { step, last_good }) => {
                assert_eq!(step, 1);
                assert_eq!(last_good.step, 0);
            }
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("expected divergence"),
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = TrainConfig {
            targets: vec![RegTarget {
                attn: AttnType::DecSelf,
                layer: 1,
                heads: HeadSelection::Average,
            }],
            ..TrainConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: TrainConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert!(TrainConfig { p_scat: 1.5, ..cfg.clone() }.validate().is_err());
        assert!(TrainConfig { lambda: -1.0, ..cfg }.validate().is_err());
    }
}
