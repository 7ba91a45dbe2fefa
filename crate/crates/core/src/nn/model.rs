//! Pre-norm encoder-decoder transformer.
//!
//! Every attention probability matrix is exposed through [`ForwardTrace`]
//! (post-softmax, before dropout), and the whole computation is recorded on
//! a [`Tape`] so that any scalar built on top of it can be differentiated.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mat::{Mat, Trans};
use super::tape::{Grads, Tape, Var};
use crate::error::{Error, Result};
use crate::scat::AttnType;
use crate::text::{TokenId, BOS, EOS, PAD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub max_len: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
}

impl Hyperparams {
    /// Desk-scale default: 2 layers, 4 heads, 128/512 dimensions.
    pub fn desk(vocab: usize) -> Self {
        Hyperparams {
            enc_layers: 2,
            dec_layers: 2,
            heads: 4,
            d_model: 128,
            d_ff: 512,
            dropout: 0.1,
            label_smoothing: 0.1,
            max_len: 512,
            src_vocab: vocab,
            tgt_vocab: vocab,
        }
    }

    /// Transformer-base: 6 layers, 8 heads, 512/2048 dimensions.
    pub fn base(vocab: usize) -> Self {
        Hyperparams {
            enc_layers: 6,
            dec_layers: 6,
            heads: 8,
            d_model: 512,
            d_ff: 2048,
            ..Self::desk(vocab)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.enc_layers == 0 || self.dec_layers == 0 || self.heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return bad("layer, head and dimension counts must be >= 1".into());
        }
        if self.src_vocab == 0 || self.tgt_vocab == 0 || self.max_len == 0 {
            return bad("vocabulary sizes and max_len must be >= 1".into());
        }
        if self.d_model % self.heads != 0 {
            return bad(format!("d_model {} not divisible by heads {}", self.d_model, self.heads));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(0.0..=1.0).contains(&self.label_smoothing) {
            return bad(format!("label smoothing {} outside [0, 1]", self.label_smoothing));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn layers(&self, attn: AttnType) -> usize {
        match attn {
            AttnType::EncSelf => self.enc_layers,
            AttnType::DecCross | AttnType::DecSelf => self.dec_layers,
        }
    }

    /// Closed-form parameter count. With `d = d_model`, `f = d_ff`:
    ///
    /// * attention block: `4d^2 + 4d`; feed-forward: `2df + f + d`; layer norm: `2d`
    /// * encoder layer: attention + feed-forward + 2 norms
    /// * decoder layer: 2 attention + feed-forward + 3 norms
    /// * plus embeddings `(Vs + Vt) d`, two final norms `4d`, output `d Vt + Vt`.
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let f = self.d_ff;
        let attn = 4 * d * d + 4 * d;
        let ffn = 2 * d * f + f + d;
        let ln = 2 * d;
        let enc = attn + ffn + 2 * ln;
        let dec = 2 * attn + ffn + 3 * ln;
        (self.src_vocab + self.tgt_vocab) * d
            + self.enc_layers * enc
            + self.dec_layers * dec
            + 2 * ln
            + d * self.tgt_vocab
            + self.tgt_vocab
    }
}

const ENC_PER_LAYER: usize = 16;
const DEC_PER_LAYER: usize = 26;

/// Named parameter tensors in a fixed canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub names: Vec<String>,
    pub tensors: Vec<Mat>,
}

fn attn_specs(prefix: &str, d: usize, out: &mut Vec<(String, (usize, usize))>) {
    for p in ["q", "k", "v", "o"] {
        out.push((format!("{prefix}.w{p}"), (d, d)));
        out.push((format!("{prefix}.b{p}"), (1, d)));
    }
}

fn ln_specs(prefix: &str, d: usize, out: &mut Vec<(String, (usize, usize))>) {
    out.push((format!("{prefix}.gain"), (1, d)));
    out.push((format!("{prefix}.bias"), (1, d)));
}

fn ffn_specs(prefix: &str, d: usize, f: usize, out: &mut Vec<(String, (usize, usize))>) {
    out.push((format!("{prefix}.w1"), (d, f)));
    out.push((format!("{prefix}.b1"), (1, f)));
    out.push((format!("{prefix}.w2"), (f, d)));
    out.push((format!("{prefix}.b2"), (1, d)));
}

/// Names and shapes of every parameter, in canonical order.
pub fn param_specs(hp: &Hyperparams) -> Vec<(String, (usize, usize))> {
    let d = hp.d_model;
    let f = hp.d_ff;
    let mut s = vec![
        ("src_embed".to_string(), (hp.src_vocab, d)),
        ("tgt_embed".to_string(), (hp.tgt_vocab, d)),
    ];
    for l in 0..hp.enc_layers {
        ln_specs(&format!("enc.{l}.ln1"), d, &mut s);
        attn_specs(&format!("enc.{l}.self"), d, &mut s);
        ln_specs(&format!("enc.{l}.ln2"), d, &mut s);
        ffn_specs(&format!("enc.{l}.ffn"), d, f, &mut s);
    }
    ln_specs("enc.ln_final", d, &mut s);
    for l in 0..hp.dec_layers {
        ln_specs(&format!("dec.{l}.ln1"), d, &mut s);
        attn_specs(&format!("dec.{l}.self"), d, &mut s);
        ln_specs(&format!("dec.{l}.ln2"), d, &mut s);
        attn_specs(&format!("dec.{l}.cross"), d, &mut s);
        ln_specs(&format!("dec.{l}.ln3"), d, &mut s);
        ffn_specs(&format!("dec.{l}.ffn"), d, f, &mut s);
    }
    ln_specs("dec.ln_final", d, &mut s);
    s.push(("out.w".to_string(), (d, hp.tgt_vocab)));
    s.push(("out.b".to_string(), (1, hp.tgt_vocab)));
    s
}

impl Parameters {
    pub fn zeros_like(&self) -> Parameters {
        Parameters {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|m| Mat::zeros(m.rows, m.cols)).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }

    pub fn get(&self, name: &str) -> Option<&Mat> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Mat::all_finite)
    }

    /// Snaps every value onto the `f32` grid so checkpoints are lossless.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    pub fn add_assign(&mut self, other: &Parameters) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }
}

/// Per-type attention probabilities, indexed `[layer][head]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMaps {
    pub enc_self: Vec<Vec<Mat>>,
    pub dec_cross: Vec<Vec<Mat>>,
    pub dec_self: Vec<Vec<Mat>>,
}

impl AttentionMaps {
    pub fn of(&self, attn: AttnType) -> &[Vec<Mat>] {
        match attn {
            AttnType::EncSelf => &self.enc_self,
            AttnType::DecCross => &self.dec_cross,
            AttnType::DecSelf => &self.dec_self,
        }
    }
}

/// Everything one teacher-forced forward pass exposes.
///
/// Decoder rows follow decoder input positions: row `t` reads
/// `[<bos>, y_0, ..., y_{t-1}]` and predicts `y_t` (or `<eos>` at the end).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub attention: AttentionMaps,
    /// Encoder output states `z`, one row per source position.
    pub enc_states: Mat,
    /// Log-probabilities over the target vocabulary per decoder position.
    pub logprobs: Mat,
}

/// Which heads feed an attention row: the first head or the mean of all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadSelection {
    First,
    Average,
    Head(usize),
}

impl ForwardTrace {
    /// Query row `row` truncated to `len` key positions.
    pub fn attention_row(&self, attn: AttnType, layer: usize, heads: HeadSelection, row: usize, len: usize) -> Vec<f64> {
        let maps = &self.attention.of(attn)[layer];
        let pick: Vec<&Mat> = match heads {
            HeadSelection::First => vec![&maps[0]],
            HeadSelection::Head(h) => vec![&maps[h]],
            HeadSelection::Average => maps.iter().collect(),
        };
        let mut out = vec![0.0; len];
        for m in &pick {
            for (o, v) in out.iter_mut().zip(&m.row(row)[..len]) {
                *o += v;
            }
        }
        let n = pick.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Tape variables of the attention maps, indexed `[layer][head]`.
pub struct AttentionVars {
    pub enc_self: Vec<Vec<Var>>,
    pub dec_cross: Vec<Vec<Var>>,
    pub dec_self: Vec<Vec<Var>>,
}

impl AttentionVars {
    pub fn of(&self, attn: AttnType) -> &[Vec<Var>] {
        match attn {
            AttnType::EncSelf => &self.enc_self,
            AttnType::DecCross => &self.dec_cross,
            AttnType::DecSelf => &self.dec_self,
        }
    }

    pub fn heads(&self, attn: AttnType, layer: usize, sel: HeadSelection) -> Vec<Var> {
        let hs = &self.of(attn)[layer];
        match sel {
            HeadSelection::First => vec![hs[0]],
            HeadSelection::Head(h) => vec![hs[h]],
            HeadSelection::Average => hs.clone(),
        }
    }
}

/// Result of recording one forward pass on a tape.
pub struct Recorded {
    pub params: Vec<Var>,
    pub enc_out: Var,
    pub logp: Var,
    pub attention: AttentionVars,
}

/// Dropout configuration for a train-mode forward.
pub struct DropoutRng<'r> {
    pub rate: f64,
    pub rng: &'r mut dyn RngCore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hp: Hyperparams,
    pub params: Parameters,
}

/// Decoder input (`<bos>` + y) and output targets (y + `<eos>`).
pub fn decoder_io(y: &[TokenId]) -> (Vec<TokenId>, Vec<TokenId>) {
    let mut input = Vec::with_capacity(y.len() + 1);
    input.push(BOS);
    input.extend_from_slice(y);
    let mut target = y.to_vec();
    target.push(EOS);
    (input, target)
}

pub fn positional_encoding(len: usize, d: usize) -> Mat {
    let mut pe = Mat::zeros(len, d);
    for pos in 0..len {
        for i in 0..d / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            *pe.at_mut(pos, 2 * i) = angle.sin();
            *pe.at_mut(pos, 2 * i + 1) = angle.cos();
        }
        if d % 2 == 1 {
            *pe.at_mut(pos, d - 1) = (pos as f64).sin();
        }
    }
    pe
}

struct Layer<'a> {
    p: &'a [Var],
}

impl Layer<'_> {
    fn at(&self, i: usize) -> Var {
        self.p[i]
    }
}

impl Model {
    /// Random initialization: `U(+-sqrt(6 / (fan_in + fan_out)))` for weight
    /// matrices, `U(+-sqrt(3 / d))` for embeddings, zero biases, unit gains.
    pub fn init(hp: Hyperparams, seed: u64) -> Result<Model> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = param_specs(&hp);
        let mut names = Vec::with_capacity(specs.len());
        let mut tensors = Vec::with_capacity(specs.len());
        for (name, (r, c)) in specs {
            let m = if name.ends_with("_embed") {
                let bound = (3.0 / hp.d_model as f64).sqrt();
                uniform(&mut rng, r, c, bound)
            } else if name.ends_with(".gain") {
                Mat::filled(r, c, 1.0)
            } else if r == 1 {
                Mat::zeros(r, c)
            } else {
                let bound = (6.0 / (r + c) as f64).sqrt();
                uniform(&mut rng, r, c, bound)
            };
            names.push(name);
            tensors.push(m);
        }
        let mut params = Parameters { names, tensors };
        params.round_to_f32();
        Ok(Model { hp, params })
    }

    pub fn from_parts(hp: Hyperparams, params: Parameters) -> Result<Model> {
        hp.validate()?;
        let specs = param_specs(&hp);
        if specs.len() != params.tensors.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                params.tensors.len()
            )));
        }
        for ((name, shape), (n, t)) in specs.iter().zip(params.names.iter().zip(&params.tensors)) {
            if name != n || *shape != t.shape() {
                return Err(Error::InvalidConfig(format!(
                    "parameter {n} {:?} does not match expected {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(Model { hp, params })
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.hp.max_len {
            return Err(Error::SequenceTooLong { len, max: self.hp.max_len });
        }
        Ok(())
    }

    fn check_ids(&self, ids: &[TokenId], vocab: usize) -> Result<()> {
        if let Some(bad) = ids.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::OutOfRange(format!("token id {bad} with vocabulary {vocab}")));
        }
        Ok(())
    }

    pub fn register<'p>(&'p self, tape: &mut Tape<'p>) -> Vec<Var> {
        self.params.tensors.iter().map(|m| tape.param(m)).collect()
    }

    fn enc_layer<'a>(&self, p: &'a [Var], l: usize) -> Layer<'a> {
        let start = 2 + l * ENC_PER_LAYER;
        Layer { p: &p[start..start + ENC_PER_LAYER] }
    }

    fn dec_layer<'a>(&self, p: &'a [Var], l: usize) -> Layer<'a> {
        let start = 2 + self.hp.enc_layers * ENC_PER_LAYER + 2 + l * DEC_PER_LAYER;
        Layer { p: &p[start..start + DEC_PER_LAYER] }
    }

    fn enc_final_ln(&self, p: &[Var]) -> (Var, Var) {
        let i = 2 + self.hp.enc_layers * ENC_PER_LAYER;
        (p[i], p[i + 1])
    }

    fn dec_final_ln(&self, p: &[Var]) -> (Var, Var) {
        let i = 2 + self.hp.enc_layers * ENC_PER_LAYER + 2 + self.hp.dec_layers * DEC_PER_LAYER;
        (p[i], p[i + 1])
    }

    fn out_proj(&self, p: &[Var]) -> (Var, Var) {
        let n = p.len();
        (p[n - 2], p[n - 1])
    }

    fn maybe_dropout(tape: &mut Tape<'_>, x: Var, drop: &mut Option<DropoutRng<'_>>) -> Var {
        match drop {
            Some(d) if d.rate > 0.0 => {
                let n = tape.value(x).len();
                let keep = 1.0 / (1.0 - d.rate);
                let mask = (0..n)
                    .map(|_| if d.rng.gen::<f64>() < d.rate { 0.0 } else { keep })
                    .collect();
                tape.dropout(x, mask)
            }
            _ => x,
        }
    }

    fn embed(&self, tape: &mut Tape<'_>, table: Var, ids: &[TokenId], drop: &mut Option<DropoutRng<'_>>) -> Var {
        let d = self.hp.d_model;
        let e = tape.gather(table, ids, (d as f64).sqrt());
        let pe = tape.constant(positional_encoding(ids.len(), d));
        let x = tape.add(e, pe);
        Self::maybe_dropout(tape, x, drop)
    }

    /// Multi-head attention using parameters `w[0..8]` = (wq, bq, wk, bk, wv, bv, wo, bo).
    fn attention(
        &self,
        tape: &mut Tape<'_>,
        w: &[Var],
        xq: Var,
        xkv: Var,
        causal: bool,
        drop: &mut Option<DropoutRng<'_>>,
    ) -> (Var, Vec<Var>) {
        let dk = self.hp.head_dim();
        let q = tape.linear(xq, w[0], w[1]);
        let k = tape.linear(xkv, w[2], w[3]);
        let v = tape.linear(xkv, w[4], w[5]);
        let scale = 1.0 / (dk as f64).sqrt();
        let mut probs = Vec::with_capacity(self.hp.heads);
        let mut ctx = Vec::with_capacity(self.hp.heads);
        for h in 0..self.hp.heads {
            let qh = tape.slice_cols(q, h * dk, dk);
            let kh = tape.slice_cols(k, h * dk, dk);
            let vh = tape.slice_cols(v, h * dk, dk);
            let scores = tape.matmul(qh, Trans::N, kh, Trans::T);
            let p = tape.softmax(scores, scale, causal);
            probs.push(p);
            let pd = Self::maybe_dropout(tape, p, drop);
            ctx.push(tape.matmul(pd, Trans::N, vh, Trans::N));
        }
        let cat = if ctx.len() == 1 { ctx[0] } else { tape.concat_cols(&ctx) };
        (tape.linear(cat, w[6], w[7]), probs)
    }

    fn ffn(&self, tape: &mut Tape<'_>, w: &[Var], x: Var) -> Var {
        let h = tape.linear(x, w[0], w[1]);
        let h = tape.relu(h);
        tape.linear(h, w[2], w[3])
    }

    fn record_encoder(
        &self,
        tape: &mut Tape<'_>,
        p: &[Var],
        src: &[TokenId],
        drop: &mut Option<DropoutRng<'_>>,
    ) -> (Var, Vec<Vec<Var>>) {
        let mut x = self.embed(tape, p[0], src, drop);
        let mut maps = Vec::with_capacity(self.hp.enc_layers);
        for l in 0..self.hp.enc_layers {
            let w = self.enc_layer(p, l);
            let h = tape.layer_norm(x, w.at(0), w.at(1));
            let (a, probs) = self.attention(tape, &w.p[2..10], h, h, false, drop);
            maps.push(probs);
            let a = Self::maybe_dropout(tape, a, drop);
            x = tape.add(x, a);
            let h = tape.layer_norm(x, w.at(10), w.at(11));
            let f = self.ffn(tape, &w.p[12..16], h);
            let f = Self::maybe_dropout(tape, f, drop);
            x = tape.add(x, f);
        }
        let (g, b) = self.enc_final_ln(p);
        (tape.layer_norm(x, g, b), maps)
    }

    fn record_decoder(
        &self,
        tape: &mut Tape<'_>,
        p: &[Var],
        enc_out: Var,
        tgt_in: &[TokenId],
        drop: &mut Option<DropoutRng<'_>>,
    ) -> (Var, Vec<Vec<Var>>, Vec<Vec<Var>>) {
        let mut y = self.embed(tape, p[1], tgt_in, drop);
        let mut self_maps = Vec::with_capacity(self.hp.dec_layers);
        let mut cross_maps = Vec::with_capacity(self.hp.dec_layers);
        for l in 0..self.hp.dec_layers {
            let w = self.dec_layer(p, l);
            let h = tape.layer_norm(y, w.at(0), w.at(1));
            let (a, probs) = self.attention(tape, &w.p[2..10], h, h, true, drop);
            self_maps.push(probs);
            let a = Self::maybe_dropout(tape, a, drop);
            y = tape.add(y, a);
            let h = tape.layer_norm(y, w.at(10), w.at(11));
            let (c, probs) = self.attention(tape, &w.p[12..20], h, enc_out, false, drop);
            cross_maps.push(probs);
            let c = Self::maybe_dropout(tape, c, drop);
            y = tape.add(y, c);
            let h = tape.layer_norm(y, w.at(20), w.at(21));
            let f = self.ffn(tape, &w.p[22..26], h);
            let f = Self::maybe_dropout(tape, f, drop);
            y = tape.add(y, f);
        }
        let (g, b) = self.dec_final_ln(p);
        let y = tape.layer_norm(y, g, b);
        let (ow, ob) = self.out_proj(p);
        let logits = tape.linear(y, ow, ob);
        (tape.log_softmax(logits), self_maps, cross_maps)
    }

    /// Records a teacher-forced pass. `tgt_in` is the decoder input
    /// (starting with `<bos>`). Pass `drop` for train mode.
    pub fn record<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        src: &[TokenId],
        tgt_in: &[TokenId],
        mut drop: Option<DropoutRng<'_>>,
    ) -> Result<Recorded> {
        self.check_len(src.len())?;
        self.check_len(tgt_in.len())?;
        if src.is_empty() || tgt_in.is_empty() {
            return Err(Error::InvalidConfig("empty source or decoder input".into()));
        }
        self.check_ids(src, self.hp.src_vocab)?;
        self.check_ids(tgt_in, self.hp.tgt_vocab)?;
        let params = self.register(tape);
        let (enc_out, enc_self) = self.record_encoder(tape, &params, src, &mut drop);
        let (logp, dec_self, dec_cross) = self.record_decoder(tape, &params, enc_out, tgt_in, &mut drop);
        Ok(Recorded {
            params,
            enc_out,
            logp,
            attention: AttentionVars {
                enc_self,
                dec_cross,
                dec_self,
            },
        })
    }

    /// Teacher-forced forward over target `y`; the decoder reads `<bos> y`.
    /// Train mode is selected by passing a dropout RNG.
    pub fn forward(&self, src: &[TokenId], y: &[TokenId], drop: Option<DropoutRng<'_>>) -> Result<ForwardTrace> {
        let (tgt_in, _) = decoder_io(y);
        let mut tape = Tape::new();
        let rec = self.record(&mut tape, src, &tgt_in, drop)?;
        let grab = |vars: &Vec<Vec<Var>>| -> Vec<Vec<Mat>> {
            vars.iter()
                .map(|hs| hs.iter().map(|&v| tape.value(v).clone()).collect())
                .collect()
        };
        Ok(ForwardTrace {
            attention: AttentionMaps {
                enc_self: grab(&rec.attention.enc_self),
                dec_cross: grab(&rec.attention.dec_cross),
                dec_self: grab(&rec.attention.dec_self),
            },
            enc_states: tape.value(rec.enc_out).clone(),
            logprobs: tape.value(rec.logp).clone(),
        })
    }

    /// Encoder states for `src` (eval mode).
    pub fn encode(&self, src: &[TokenId]) -> Result<Mat> {
        self.check_len(src.len())?;
        self.check_ids(src, self.hp.src_vocab)?;
        if src.is_empty() {
            return Err(Error::InvalidConfig("empty source".into()));
        }
        let mut tape = Tape::new();
        let p = self.register(&mut tape);
        let (z, _) = self.record_encoder(&mut tape, &p, src, &mut None);
        Ok(tape.value(z).clone())
    }

    /// Decoder log-probabilities given fixed encoder states (eval mode).
    pub fn decoder_logprobs(&self, enc: &Mat, tgt_in: &[TokenId]) -> Result<Mat> {
        self.check_len(tgt_in.len())?;
        self.check_ids(tgt_in, self.hp.tgt_vocab)?;
        let mut tape = Tape::new();
        let p = self.register(&mut tape);
        let z = tape.constant(enc.clone());
        let (lp, _, _) = self.record_decoder(&mut tape, &p, z, tgt_in, &mut None);
        Ok(tape.value(lp).clone())
    }

    /// Extracts parameter gradients after [`Tape::backward`].
    pub fn collect_grads(&self, grads: &mut Grads, params: &[Var]) -> Parameters {
        let tensors = params
            .iter()
            .zip(&self.params.tensors)
            .map(|(&v, m)| grads.take(v).unwrap_or_else(|| Mat::zeros(m.rows, m.cols)))
            .collect();
        Parameters {
            names: self.params.names.clone(),
            tensors,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Mat::from_vec(rows, cols, data)
}

/// Decoder rows contributing to the MT loss: every output position whose
/// target is not `<pad>`, restricted to `span` (half-open, decoder rows).
pub fn loss_targets(targets: &[TokenId], span: std::ops::Range<usize>) -> Result<Vec<(usize, TokenId)>> {
    if span.start >= span.end || span.end > targets.len() {
        return Err(Error::OutOfRange(format!(
            "loss span {span:?} for {} target positions",
            targets.len()
        )));
    }
    let rows: Vec<(usize, TokenId)> = span
        .filter(|&r| targets[r] != PAD)
        .map(|r| (r, targets[r]))
        .collect();
    if rows.is_empty() {
        return Err(Error::OutOfRange("loss span contains only padding".into()));
    }
    Ok(rows)
}

/// Mean label-smoothed negative log-likelihood of `targets` over `span`.
pub fn loss_mt(logprobs: &Mat, targets: &[TokenId], span: std::ops::Range<usize>, smoothing: f64) -> Result<f64> {
    let rows = loss_targets(targets, span)?;
    let v = logprobs.cols as f64;
    let total: f64 = rows
        .iter()
        .map(|&(r, t)| {
            let row = logprobs.row(r);
            let nll = -row[t as usize];
            if smoothing == 0.0 {
                return nll;
            }
            (1.0 - smoothing) * nll + smoothing * -row.iter().sum::<f64>() / v
        })
        .sum();
    Ok(total / rows.len() as f64)
}
