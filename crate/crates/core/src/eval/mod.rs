//! Contrastive scoring, context masking and document translation with gold
//! or model-generated target context.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{decode, decoder_io, DecodeMethod, Seq2Seq};
use crate::scat::{EncodedScat, HumanAttentionVector, PronounQuery, ScatExample};
use crate::text::{
    concat_with_context, current_sentence_span, ContextConfig, ParallelDocument, TokenId, TokenSeq, Vocabulary, BRK,
    MASK,
};

/// A source with a correct and an incorrect target, all with context.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastivePair {
    pub id: String,
    pub src: Vec<TokenId>,
    pub correct: Vec<TokenId>,
    pub incorrect: Vec<TokenId>,
    pub query: PronounQuery,
    /// Highlight bits over `src` and `correct` (all zero when absent).
    pub human_src: HumanAttentionVector,
    pub human_tgt: HumanAttentionVector,
}

impl ContrastivePair {
    pub fn from_example(ex: &ScatExample, cfg: ContextConfig, vocab: &Vocabulary) -> Result<Self> {
        let enc = EncodedScat::new(ex, cfg, vocab)?;
        Ok(Self::from_encoded(&ex.id, enc))
    }

    pub fn from_encoded(id: &str, enc: EncodedScat) -> Self {
        ContrastivePair {
            id: id.to_string(),
            src: enc.src.ids,
            correct: enc.tgt.ids,
            incorrect: enc.tgt_incorrect.ids,
            query: enc.query,
            human_src: enc.human_src,
            human_tgt: enc.human_tgt,
        }
    }

    pub fn has_highlights(&self) -> bool {
        self.human_src.count() + self.human_tgt.count() > 0
    }
}

pub fn pairs_from_examples(examples: &[ScatExample], cfg: ContextConfig, vocab: &Vocabulary) -> Result<Vec<ContrastivePair>> {
    examples.iter().map(|e| ContrastivePair::from_example(e, cfg, vocab)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "p")]
pub enum MaskKind {
    None,
    /// Highlighted tokens on both sides, except the ambiguous pronoun.
    Supporting,
    /// Every context token independently with probability `p`.
    Random(f64),
    SourceContext,
    TargetContext,
    AllContext,
}

impl MaskKind {
    /// The six ablations reported side by side.
    pub fn ablations() -> [MaskKind; 6] {
        [
            MaskKind::None,
            MaskKind::Supporting,
            MaskKind::Random(0.1),
            MaskKind::SourceContext,
            MaskKind::TargetContext,
            MaskKind::AllContext,
        ]
    }

    pub fn label(&self) -> String {
        match self {
            MaskKind::None => "none".into(),
            MaskKind::Supporting => "supporting".into(),
            MaskKind::Random(p) => format!("random:{p}"),
            MaskKind::SourceContext => "source-context".into(),
            MaskKind::TargetContext => "target-context".into(),
            MaskKind::AllContext => "all-context".into(),
        }
    }
}

impl std::str::FromStr for MaskKind {
    type Err = Error;

    /// `none`, `supporting`, `random` (p = 0.1), `random:<p>`,
    /// `source-context`, `target-context`, `all-context`.
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "none" => MaskKind::None,
            "supporting" => MaskKind::Supporting,
            "random" => MaskKind::Random(0.1),
            "source-context" => MaskKind::SourceContext,
            "target-context" => MaskKind::TargetContext,
            "all-context" => MaskKind::AllContext,
            other => match other.strip_prefix("random:").map(str::parse::<f64>) {
                Some(Ok(p)) => MaskKind::Random(p),
                _ => return Err(Error::InvalidConfig(format!("unknown mask kind {other:?}"))),
            },
        };
        if let MaskKind::Random(p) = kind {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("mask probability {p} outside [0, 1]")));
            }
        }
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub kind: MaskKind,
    pub seed: u64,
}

impl MaskSpec {
    pub fn new(kind: MaskKind, seed: u64) -> Self {
        MaskSpec { kind, seed }
    }

    /// Per-pair stream keyed by the pair id, so results do not depend on
    /// pair order.
    fn rng_for(&self, id: &str) -> ChaCha8Rng {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in id.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }
}

/// Context positions of a concatenated sequence: everything before the
/// current sentence except `<brk>` separators.
fn context_positions(ids: &[TokenId]) -> Vec<usize> {
    let (start, _) = current_sentence_span(&TokenSeq::new(ids.to_vec()));
    (0..start).filter(|&i| ids[i] != BRK).collect()
}

/// Replaces the selected tokens with `<mask>`. Lengths never change; the
/// current-sentence tokens are only touched by supporting masks, and the
/// pronoun never is. The incorrect target gets the same positions as the
/// correct one wherever the two share a prefix or have equal length.
pub fn apply_mask(pair: &ContrastivePair, spec: &MaskSpec) -> ContrastivePair {
    let src_ctx = context_positions(&pair.src);
    let tgt_ctx = context_positions(&pair.correct);
    let (src_pos, tgt_pos): (BTreeSet<usize>, BTreeSet<usize>) = match spec.kind {
        MaskKind::None => (BTreeSet::new(), BTreeSet::new()),
        MaskKind::Supporting => (
            pair.human_src.positions().filter(|&i| i != pair.query.src).collect(),
            pair.human_tgt.positions().filter(|&i| i != pair.query.tgt).collect(),
        ),
        MaskKind::Random(p) => {
            let mut rng = spec.rng_for(&pair.id);
            let s = src_ctx.iter().copied().filter(|_| rng.gen::<f64>() < p).collect();
            let t = tgt_ctx.iter().copied().filter(|_| rng.gen::<f64>() < p).collect();
            (s, t)
        }
        MaskKind::SourceContext => (src_ctx.into_iter().collect(), BTreeSet::new()),
        MaskKind::TargetContext => (BTreeSet::new(), tgt_ctx.into_iter().collect()),
        MaskKind::AllContext => (src_ctx.into_iter().collect(), tgt_ctx.into_iter().collect()),
    };
    let mask = |ids: &[TokenId], pos: &BTreeSet<usize>, limit: usize| -> Vec<TokenId> {
        let mut out = ids.to_vec();
        for &i in pos.iter().filter(|&&i| i < limit) {
            out[i] = MASK;
        }
        out
    };
    let shared = if pair.incorrect.len() == pair.correct.len() {
        pair.correct.len()
    } else {
        pair.correct
            .iter()
            .zip(&pair.incorrect)
            .take_while(|(a, b)| a == b)
            .count()
    };
    ContrastivePair {
        src: mask(&pair.src, &src_pos, pair.src.len()),
        correct: mask(&pair.correct, &tgt_pos, pair.correct.len()),
        incorrect: mask(&pair.incorrect, &tgt_pos, shared),
        ..pair.clone()
    }
}

/// Sum of teacher-forced log-probabilities of `tgt[span]`.
pub fn score_candidate<M: Seq2Seq>(
    model: &M,
    src: &[TokenId],
    tgt: &[TokenId],
    span: Option<std::ops::Range<usize>>,
) -> Result<f64> {
    let mem = model.encode(src)?;
    score_with_memory(model, &mem, tgt, span)
}

fn score_with_memory<M: Seq2Seq>(
    model: &M,
    mem: &M::Memory,
    tgt: &[TokenId],
    span: Option<std::ops::Range<usize>>,
) -> Result<f64> {
    let span = span.unwrap_or_else(|| {
        let (s, e) = current_sentence_span(&TokenSeq::new(tgt.to_vec()));
        s..e
    });
    if span.end > tgt.len() || span.start > span.end {
        return Err(Error::OutOfRange(format!("span {span:?} of {} tokens", tgt.len())));
    }
    let (tgt_in, tgt_out) = decoder_io(tgt);
    let lp = model.decoder_logprobs(mem, &tgt_in)?;
    Ok(span.map(|t| lp.at(t, tgt_out[t] as usize)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub id: String,
    pub correct_score: f64,
    pub incorrect_score: f64,
    /// Strictly higher score for the correct candidate.
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveReport {
    pub mask: MaskKind,
    pub accuracy: f64,
    pub outcomes: Vec<PairOutcome>,
}

/// Masks, scores both candidates over their current sentences and counts
/// pairs where the correct one wins; ties are wrong.
pub fn contrastive_accuracy<M: Seq2Seq>(model: &M, pairs: &[ContrastivePair], spec: &MaskSpec) -> Result<ContrastiveReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("contrastive set"));
    }
    if spec.kind == MaskKind::Supporting && !pairs.iter().any(ContrastivePair::has_highlights) {
        return Err(Error::InvalidConfig(
            "supporting-context masking needs highlighted tokens".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let masked = apply_mask(pair, spec);
        let mem = model.encode(&masked.src)?;
        let c = score_with_memory(model, &mem, &masked.correct, None)?;
        let i = score_with_memory(model, &mem, &masked.incorrect, None)?;
        outcomes.push(PairOutcome {
            id: pair.id.clone(),
            correct_score: c,
            incorrect_score: i,
            correct: c > i,
        });
    }
    let accuracy = outcomes.iter().filter(|o| o.correct).count() as f64 / outcomes.len() as f64;
    Ok(ContrastiveReport {
        mask: spec.kind,
        accuracy,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    /// Reference previous target sentences.
    Gold,
    /// The model's own previous outputs.
    NonGold,
}

impl std::str::FromStr for ContextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(ContextMode::Gold),
            "non-gold" => Ok(ContextMode::NonGold),
            other => Err(Error::InvalidConfig(format!("unknown context mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub method: DecodeMethod,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            method: DecodeMethod::Beam(4),
            max_len: 100,
        }
    }
}

/// Decodes one current sentence given its source (with context) and the
/// target context sentences, which are forced as a prefix.
pub fn translate_sentence<M: Seq2Seq>(
    model: &M,
    src: &[TokenId],
    tgt_context: &[Vec<TokenId>],
    dc: DecodeConfig,
) -> Result<Vec<TokenId>> {
    let mut prefix = Vec::new();
    for s in tgt_context {
        prefix.extend_from_slice(s);
        prefix.push(BRK);
    }
    let hyp = decode(model, src, &prefix, dc.method, dc.max_len)?;
    let start = hyp.tokens.iter().rposition(|&t| t == BRK).map_or(0, |p| p + 1);
    Ok(hyp.tokens[start..].to_vec())
}

/// Translates every sentence of `doc` in order and returns the
/// current-sentence hypotheses as token ids.
pub fn translate_document<M: Seq2Seq>(
    model: &M,
    doc: &ParallelDocument,
    cfg: ContextConfig,
    mode: ContextMode,
    dc: DecodeConfig,
    vocab: &Vocabulary,
) -> Result<Vec<Vec<TokenId>>> {
    if doc.is_empty() {
        return Err(Error::EmptyDataset("document"));
    }
    let sources: Vec<&str> = doc.sources().collect();
    let refs: Vec<Vec<TokenId>> = doc.targets().map(|t| vocab.encode(t).ids).collect();
    let mut hyps: Vec<Vec<TokenId>> = Vec::with_capacity(doc.len());
    for j in 0..doc.len() {
        let src = concat_with_context(&sources[..j], sources[j], cfg.n, vocab);
        let history = match mode {
            ContextMode::Gold => &refs[..j],
            ContextMode::NonGold => &hyps[..j],
        };
        let ctx = &history[j - cfg.m.min(j)..];
        let out = translate_sentence(model, &src.ids, ctx, dc)?;
        hyps.push(out);
    }
    Ok(hyps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::decode::tests::DeltaModel;
    use crate::nn::Mat;
    use crate::text::EOS;

    fn pair() -> ContrastivePair {
        // src: [a b <brk> c d], tgt: [x y <brk> z w]
        ContrastivePair {
            id: "p".into(),
            src: vec![6, 7, BRK, 8, 9],
            correct: vec![10, 11, BRK, 12, 13],
            incorrect: vec![10, 11, BRK, 14, 13],
            query: PronounQuery { src: 3, tgt: 3 },
            human_src: HumanAttentionVector(vec![0, 1, 0, 0, 0]),
            human_tgt: HumanAttentionVector(vec![0, 0, 0, 1, 0]),
        }
    }

    #[test]
    fn mask_kinds() {
        let p = pair();
        let none = apply_mask(&p, &MaskSpec::new(MaskKind::None, 0));
        assert_eq!(none, p);
        let all = apply_mask(&p, &MaskSpec::new(MaskKind::Random(1.0), 0));
        assert_eq!(all.src, vec![MASK, MASK, BRK, 8, 9]);
        assert_eq!(all.correct, vec![MASK, MASK, BRK, 12, 13]);
        assert_eq!(all.incorrect, vec![MASK, MASK, BRK, 14, 13]);
        assert_eq!(apply_mask(&p, &MaskSpec::new(MaskKind::AllContext, 0)), all);
        // the target highlight sits on the pronoun and is kept
        let sup = apply_mask(&p, &MaskSpec::new(MaskKind::Supporting, 0));
        assert_eq!(sup.src, vec![6, MASK, BRK, 8, 9]);
        assert_eq!(sup.correct, p.correct);
        let s = apply_mask(&p, &MaskSpec::new(MaskKind::SourceContext, 0));
        assert_eq!((s.src[0], s.correct[0]), (MASK, 10));
        let t = apply_mask(&p, &MaskSpec::new(MaskKind::TargetContext, 0));
        assert_eq!((t.src[0], t.correct[0]), (6, MASK));
        for k in MaskKind::ablations() {
            let m = apply_mask(&p, &MaskSpec::new(k, 3));
            assert_eq!((m.src.len(), m.correct.len()), (5, 5));
        }
    }

    #[test]
    fn mask_kind_parsing() {
        assert_eq!("random:0.3".parse::<MaskKind>().unwrap(), MaskKind::Random(0.3));
        assert_eq!("random".parse::<MaskKind>().unwrap(), MaskKind::Random(0.1));
        assert!("blur".parse::<MaskKind>().is_err());
        assert!("random:2".parse::<MaskKind>().is_err());
        for k in MaskKind::ablations() {
            assert_eq!(k.label().parse::<MaskKind>().unwrap(), k);
        }
    }

    #[test]
    fn delta_model_scores_zero_on_its_sequence() {
        let m = DeltaModel { seq: vec![10, 11, BRK, 12, 13], vocab: 16 };
        assert_eq!(score_candidate(&m, &[6], &[10, 11, BRK, 12, 13], None).unwrap(), 0.0);
        assert_eq!(score_candidate(&m, &[6], &[10, 11, BRK, 12, 14], None).unwrap(), f64::NEG_INFINITY);
        let p = pair();
        let r = contrastive_accuracy(&m, &[p], &MaskSpec::new(MaskKind::None, 0)).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn ties_are_incorrect() {
        let m = DeltaModel { seq: vec![], vocab: 16 };
        let r = contrastive_accuracy(&m, &[pair()], &MaskSpec::new(MaskKind::None, 0)).unwrap();
        assert_eq!(r.outcomes[0].correct_score, r.outcomes[0].incorrect_score);
        assert!(!r.outcomes[0].correct);
        assert!(contrastive_accuracy(&m, &[], &MaskSpec::new(MaskKind::None, 0)).is_err());
    }

    /// Emits the first token of the first target-context sentence (or 6
    /// without context) as the current sentence, then `<eos>`.
    struct CopyModel;

    impl Seq2Seq for CopyModel {
        type Memory = ();

        fn encode(&self, _src: &[TokenId]) -> Result<()> {
            Ok(())
        }

        fn decoder_logprobs(&self, _mem: &(), tgt_in: &[TokenId]) -> Result<Mat> {
            let v = 16;
            let mut m = Mat::filled(tgt_in.len(), v, f64::NEG_INFINITY);
            for r in 0..tgt_in.len() {
                let seen = &tgt_in[..=r];
                let next = match seen.iter().rposition(|&t| t == BRK) {
                    Some(p) if p + 1 == seen.len() => seen[1],
                    None if seen.len() == 1 => 6,
                    _ => EOS,
                };
                *m.at_mut(r, next as usize) = 0.0;
            }
            Ok(m)
        }
    }

    #[test]
    fn gold_vs_non_gold() {
        let vocab = Vocabulary::from_words(["a", "b", "c", "x", "y", "z", "k", "l"]).unwrap();
        let doc = ParallelDocument::new(
            "d",
            vec![
                ("a".into(), "x".into()),
                ("b".into(), "y".into()),
                ("c".into(), "z".into()),
            ],
        )
        .unwrap();
        let dc = DecodeConfig { method: DecodeMethod::Greedy, max_len: 5 };
        let gold = translate_document(&CopyModel, &doc, ContextConfig::new(1, 1), ContextMode::Gold, dc, &vocab).unwrap();
        let own = translate_document(&CopyModel, &doc, ContextConfig::new(1, 1), ContextMode::NonGold, dc, &vocab).unwrap();
        assert_eq!(gold[0], own[0]);
        assert_eq!(gold[1], vec![vocab.id("x").unwrap()]);
        assert_eq!(own[1], vec![6]);
        let no_ctx = ContextConfig::new(1, 0);
        assert_eq!(
            translate_document(&CopyModel, &doc, no_ctx, ContextMode::Gold, dc, &vocab).unwrap(),
            translate_document(&CopyModel, &doc, no_ctx, ContextMode::NonGold, dc, &vocab).unwrap()
        );
        // sentence 3 depends on the sentence-2 hypothesis
        let src = concat_with_context(&["b"], "c", 1, &vocab).ids;
        let a = translate_sentence(&CopyModel, &src, &[own[1].clone()], dc).unwrap();
        let b = translate_sentence(&CopyModel, &src, &[vec![7]], dc).unwrap();
        assert_eq!(a, own[2]);
        assert_ne!(a, b);
        assert_eq!(b, vec![7]);
    }
}
