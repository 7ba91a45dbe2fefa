//! Rationale-annotated contrastive examples and human attention vectors.
//!
//! Each example carries the ambiguous pronoun's position in the current
//! source and target sentence plus the tokens annotators highlighted as
//! supporting context. Highlights are `(sentence offset, token index)`
//! pairs where offset `0` is the current sentence and `-d` the `d`-th
//! previous sentence on that side.

mod convert;

pub use convert::{convert_release, ConvertReport};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::text::{concat_with_context, tokenize, ContextConfig, TokenSeq, Vocabulary};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// `(sentence offset <= 0, token index)`.
pub type Highlight = (i32, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatExample {
    pub id: String,
    pub ctx_src: Vec<String>,
    pub ctx_tgt: Vec<String>,
    pub src: String,
    pub tgt_correct: String,
    pub tgt_incorrect: String,
    pub pron_src_idx: usize,
    pub pron_tgt_idx: usize,
    #[serde(default)]
    pub hl_src: Vec<Highlight>,
    #[serde(default)]
    pub hl_tgt: Vec<Highlight>,
    pub ctx_level: String,
    #[serde(default)]
    pub confidence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// Which attention distribution a human vector is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttnType {
    EncSelf,
    DecCross,
    DecSelf,
}

impl AttnType {
    pub const ALL: [AttnType; 3] = [AttnType::EncSelf, AttnType::DecCross, AttnType::DecSelf];

    pub fn name(self) -> &'static str {
        match self {
            AttnType::EncSelf => "enc-self",
            AttnType::DecCross => "dec-cross",
            AttnType::DecSelf => "dec-self",
        }
    }
}

impl std::str::FromStr for AttnType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enc-self" => Ok(AttnType::EncSelf),
            "dec-cross" => Ok(AttnType::DecCross),
            "dec-self" => Ok(AttnType::DecSelf),
            other => Err(Error::InvalidConfig(format!("unknown attention type {other:?}"))),
        }
    }
}

impl std::fmt::Display for AttnType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

const REQUIRED_FIELDS: [&str; 12] = [
    "id",
    "ctx_src",
    "ctx_tgt",
    "src",
    "tgt_correct",
    "tgt_incorrect",
    "pron_src_idx",
    "pron_tgt_idx",
    "hl_src",
    "hl_tgt",
    "ctx_level",
    "confidence",
];

/// Fields that contrastive sets may omit.
const OPTIONAL_IN_CONTRASTIVE: [&str; 4] = ["hl_src", "hl_tgt", "ctx_level", "confidence"];

impl ScatExample {
    /// Parses and validates one JSON object. `line` is used in messages.
    pub fn from_json_line(text: &str, line: usize, require_highlights: bool) -> Result<Self> {
        let mut obj: Map<String, Value> = serde_json::from_str(text).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field)
                && (require_highlights || !OPTIONAL_IN_CONTRASTIVE.contains(&field))
            {
                return Err(Error::MissingField {
                    field: field.to_string(),
                    line,
                });
            }
        }
        if let Some(Value::Number(n)) = obj.get("id") {
            let s = n.to_string();
            obj.insert("id".into(), Value::String(s));
        }
        let mut ex: ScatExample =
            serde_json::from_value(Value::Object(obj)).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        if ex.ctx_level.is_empty() {
            ex.ctx_level = format!("{}+{}", ex.ctx_src.len(), ex.ctx_tgt.len());
        }
        ex.validate().map_err(|e| match e {
            Error::OutOfRange(msg) => Error::OutOfRange(format!("line {line}: {msg}")),
            Error::InvalidConfig(msg) => Error::Parse { line, msg },
            other => other,
        })?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<()> {
        let src_len = tokenize(&self.src).len();
        let tgt_len = tokenize(&self.tgt_correct).len();
        if self.pron_src_idx >= src_len {
            return Err(Error::OutOfRange(format!(
                "pron_src_idx {} in a {src_len}-token sentence",
                self.pron_src_idx
            )));
        }
        if self.pron_tgt_idx >= tgt_len {
            return Err(Error::OutOfRange(format!(
                "pron_tgt_idx {} in a {tgt_len}-token sentence",
                self.pron_tgt_idx
            )));
        }
        if self.tgt_correct == self.tgt_incorrect {
            return Err(Error::InvalidConfig(
                "tgt_correct and tgt_incorrect are identical".into(),
            ));
        }
        for side in [Side::Source, Side::Target] {
            for &(off, idx) in self.highlights(side) {
                let sent = self.sentence(side, off).ok_or_else(|| {
                    Error::OutOfRange(format!("{side:?} highlight sentence offset {off}"))
                })?;
                let n = tokenize(sent).len();
                if idx >= n {
                    return Err(Error::OutOfRange(format!(
                        "{side:?} highlight token index {idx} in a {n}-token sentence"
                    )));
                }
            }
        }
        let expected = format!("{}+{}", self.ctx_src.len(), self.ctx_tgt.len());
        if self.ctx_level != expected {
            return Err(Error::InvalidConfig(format!(
                "ctx_level {} does not match context lengths {expected}",
                self.ctx_level
            )));
        }
        Ok(())
    }

    pub fn highlights(&self, side: Side) -> &[Highlight] {
        match side {
            Side::Source => &self.hl_src,
            Side::Target => &self.hl_tgt,
        }
    }

    pub fn context(&self, side: Side) -> &[String] {
        match side {
            Side::Source => &self.ctx_src,
            Side::Target => &self.ctx_tgt,
        }
    }

    pub fn current(&self, side: Side) -> &str {
        match side {
            Side::Source => &self.src,
            Side::Target => &self.tgt_correct,
        }
    }

    /// Sentence at `offset` (0 = current, -d = d-th previous) on `side`.
    pub fn sentence(&self, side: Side, offset: i32) -> Option<&str> {
        if offset > 0 {
            return None;
        }
        if offset == 0 {
            return Some(self.current(side));
        }
        let ctx = self.context(side);
        let d = (-offset) as usize;
        ctx.len().checked_sub(d).map(|i| ctx[i].as_str())
    }

    pub fn context_level(&self) -> ContextConfig {
        ContextConfig::new(self.ctx_src.len(), self.ctx_tgt.len())
    }
}

/// Parses a JSON-lines file of annotated examples (all fields required).
pub fn parse_scat(text: &str) -> Result<Vec<ScatExample>> {
    parse_lines(text, true)
}

/// Parses a contrastive set: the same schema with highlights optional.
pub fn parse_contrastive_set(text: &str) -> Result<Vec<ScatExample>> {
    parse_lines(text, false)
}

fn parse_lines(text: &str, require_highlights: bool) -> Result<Vec<ScatExample>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| ScatExample::from_json_line(l, i + 1, require_highlights))
        .collect()
}

/// Parses what it can, collecting per-line errors instead of stopping.
pub fn parse_scat_lenient(text: &str) -> (Vec<ScatExample>, Vec<Error>) {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        match ScatExample::from_json_line(l, i + 1, true) {
            Ok(ex) => good.push(ex),
            Err(e) => bad.push(e),
        }
    }
    (good, bad)
}

pub fn read_scat(path: &Path) -> Result<Vec<ScatExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scat(&text)
}

pub fn write_scat(path: &Path, examples: &[ScatExample]) -> Result<()> {
    let text = crate::report::to_json_lines(examples)?;
    crate::report::write_atomic(path, text.as_bytes())
}

/// Binary vector over a concatenated token sequence: 1 marks a highlight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanAttentionVector(pub Vec<u8>);

impl HumanAttentionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }
}

/// ε-smoothed distribution uniform over the highlighted tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedHumanAttention {
    pub probs: Vec<f64>,
    pub epsilon: f64,
    pub k: usize,
}

/// Maps highlights of `side` onto the concatenated sequence built with a
/// context window of `window` sentences. Highlights outside the window are
/// dropped; `<brk>` positions are never set.
pub fn human_vector_in_window(
    ex: &ScatExample,
    side: Side,
    window: usize,
    vocab: &Vocabulary,
) -> Result<(TokenSeq, HumanAttentionVector)> {
    let ctx = ex.context(side);
    let seq = concat_with_context(ctx, ex.current(side), window, vocab);
    if seq.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "example {}: empty {side:?} sequence",
            ex.id
        )));
    }
    let take = window.min(ctx.len());
    let mut bits = vec![0u8; seq.len()];
    for &(off, idx) in ex.highlights(side) {
        let d = (-off) as usize;
        if d > take {
            continue;
        }
        let range = seq
            .sentence_range(take - d)
            .ok_or_else(|| Error::OutOfRange(format!("example {}: sentence offset {off}", ex.id)))?;
        let pos = range.start + idx;
        if pos >= range.end {
            return Err(Error::OutOfRange(format!(
                "example {}: highlight ({off}, {idx})",
                ex.id
            )));
        }
        bits[pos] = 1;
    }
    Ok((seq, HumanAttentionVector(bits)))
}

pub fn human_vector(
    ex: &ScatExample,
    side: Side,
    cfg: ContextConfig,
    vocab: &Vocabulary,
) -> Result<HumanAttentionVector> {
    let window = match side {
        Side::Source => cfg.n,
        Side::Target => cfg.m,
    };
    human_vector_in_window(ex, side, window, vocab).map(|(_, h)| h)
}

pub fn normalize_human(h: &HumanAttentionVector, epsilon: f64) -> Result<NormalizedHumanAttention> {
    let l = h.len();
    let k = h.count();
    if k == 0 {
        return Err(Error::NoHighlights);
    }
    if !(epsilon >= 0.0) || epsilon * l as f64 >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "epsilon {epsilon} with length {l} violates epsilon * L < 1"
        )));
    }
    let hi = (1.0 - (l - k) as f64 * epsilon) / k as f64;
    let probs = h.0.iter().map(|&b| if b == 1 { hi } else { epsilon }).collect();
    Ok(NormalizedHumanAttention { probs, epsilon, k })
}

/// Positions of the ambiguous pronoun inside the concatenated sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PronounQuery {
    pub src: usize,
    pub tgt: usize,
}

/// Restricts a (source, target) human vector pair to the key space of one
/// attention type, for the query at the pronoun.
///
/// * `enc-self`: source vector, with the pronoun's own position cleared.
/// * `dec-cross`: source vector unchanged.
/// * `dec-self`: decoder input positions `0..=q` where position 0 is `<bos>`
///   and position `k + 1` holds target token `k`; `q` is the decoder step
///   that predicts the pronoun, so only target tokens before it are visible.
pub fn project_to_keyspace(
    src: &HumanAttentionVector,
    tgt: &HumanAttentionVector,
    attn: AttnType,
    query: PronounQuery,
) -> Result<HumanAttentionVector> {
    let projected = match attn {
        AttnType::EncSelf => {
            let mut v = src.0.clone();
            if let Some(b) = v.get_mut(query.src) {
                *b = 0;
            }
            v
        }
        AttnType::DecCross => src.0.clone(),
        AttnType::DecSelf => {
            let q = query.tgt;
            if q >= tgt.len() {
                return Err(Error::OutOfRange(format!(
                    "target query {q} beyond length {}",
                    tgt.len()
                )));
            }
            let mut v = vec![0u8; q + 1];
            v[1..].copy_from_slice(&tgt.0[..q]);
            v
        }
    };
    let v = HumanAttentionVector(projected);
    if v.count() == 0 {
        return Err(Error::NoHighlights);
    }
    Ok(v)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightHistogram {
    pub source: BTreeMap<usize, usize>,
    pub target: BTreeMap<usize, usize>,
}

/// Counts highlights by sentence distance from the current sentence.
pub fn highlight_distance_histogram(examples: &[ScatExample]) -> HighlightHistogram {
    let mut h = HighlightHistogram::default();
    for ex in examples {
        for &(off, _) in &ex.hl_src {
            *h.source.entry((-off) as usize).or_default() += 1;
        }
        for &(off, _) in &ex.hl_tgt {
            *h.target.entry((-off) as usize).or_default() += 1;
        }
    }
    h
}

/// A SCAT example mapped onto concatenated model inputs.
#[derive(Debug, Clone)]
pub struct EncodedScat {
    pub src: TokenSeq,
    pub tgt: TokenSeq,
    pub tgt_incorrect: TokenSeq,
    pub query: PronounQuery,
    pub human_src: HumanAttentionVector,
    pub human_tgt: HumanAttentionVector,
}

impl EncodedScat {
    pub fn new(ex: &ScatExample, cfg: ContextConfig, vocab: &Vocabulary) -> Result<Self> {
        let (src, human_src) = human_vector_in_window(ex, Side::Source, cfg.n, vocab)?;
        let (tgt, human_tgt) = human_vector_in_window(ex, Side::Target, cfg.m, vocab)?;
        let tgt_incorrect = concat_with_context(&ex.ctx_tgt, &ex.tgt_incorrect, cfg.m, vocab);
        let src_start = *src.boundaries.last().expect("non-empty");
        let tgt_start = *tgt.boundaries.last().expect("non-empty");
        Ok(EncodedScat {
            query: PronounQuery {
                src: src_start + ex.pron_src_idx,
                tgt: tgt_start + ex.pron_tgt_idx,
            },
            src,
            tgt,
            tgt_incorrect,
            human_src,
            human_tgt,
        })
    }

    pub fn projected(&self, attn: AttnType) -> Result<HumanAttentionVector> {
        project_to_keyspace(&self.human_src, &self.human_tgt, attn, self.query)
    }
}
