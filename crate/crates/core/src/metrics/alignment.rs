//! Agreement between model attention rows and human rationales, and the
//! layer/head sweep over a rationale set.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::kl_divergence;
use crate::nn::{ForwardTrace, HeadSelection, Model};
use crate::scat::{normalize_human, AttnType, EncodedScat, HumanAttentionVector};

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

/// Attention mass on highlighted positions: `sum_i human[i] * model[i]`.
pub fn dot_alignment(human: &[f64], model: &[f64]) -> Result<f64> {
    same_len(human.len(), model.len())?;
    Ok(human.iter().zip(model).map(|(h, m)| h * m).sum())
}

/// `KL(human_norm || model)`.
pub fn kl_alignment(human_norm: &[f64], model: &[f64]) -> Result<f64> {
    same_len(human_norm.len(), model.len())?;
    Ok(kl_divergence(human_norm, model))
}

/// 1-based rank of the first highlighted position when positions are
/// sorted by descending attention, ties by ascending position.
pub fn probes_needed(human: &HumanAttentionVector, model: &[f64]) -> Result<usize> {
    same_len(human.len(), model.len())?;
    if human.count() == 0 {
        return Err(Error::NoHighlights);
    }
    let mut order: Vec<usize> = (0..model.len()).collect();
    order.sort_by(|&a, &b| model[b].total_cmp(&model[a]).then(a.cmp(&b)));
    let rank = order
        .iter()
        .position(|&i| human.0[i] == 1)
        .expect("at least one highlight");
    Ok(rank + 1)
}

/// Anything that can produce attention maps for a rationale example.
pub trait AttentionSource {
    fn trace(&self, ex: &EncodedScat) -> Result<ForwardTrace>;
}

impl AttentionSource for Model {
    fn trace(&self, ex: &EncodedScat) -> Result<ForwardTrace> {
        self.forward(&ex.src.ids, &ex.tgt.ids, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadMode {
    PerHead,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dot,
    Kl,
    Probes,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Dot, Metric::Kl, Metric::Probes];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub dot: f64,
    pub kl: f64,
    pub probes: f64,
}

impl Scores {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Dot => self.dot,
            Metric::Kl => self.kl,
            Metric::Probes => self.probes,
        }
    }
}

/// Means for one (attention type, layer, head) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub attn: AttnType,
    pub layer: usize,
    pub heads: HeadSelection,
    pub scores: Scores,
    /// Examples averaged into this cell.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub cells: Vec<Cell>,
    /// Scores of a uniform attention row, per attention type.
    pub uniform: BTreeMap<AttnType, Scores>,
    /// Examples that produced a trace.
    pub examples: usize,
    /// Examples skipped per attention type (no highlight in its key space,
    /// or no trace at all).
    pub skipped: BTreeMap<AttnType, usize>,
}

impl AlignmentReport {
    /// Best cell for `metric` within `attn`: max dot, min KL, min probes.
    /// Ties keep the earliest cell.
    pub fn argbest(&self, metric: Metric, attn: AttnType) -> Option<&Cell> {
        let mut best: Option<&Cell> = None;
        for c in self.cells.iter().filter(|c| c.attn == attn && c.count > 0) {
            let v = c.scores.get(metric);
            let better = match best {
                None => true,
                Some(b) if metric.higher_is_better() => v > b.scores.get(metric),
                Some(b) => v < b.scores.get(metric),
            };
            if better {
                best = Some(c);
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attn,layer,heads,dot,kl,probes,count\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.attn,
                c.layer,
                heads_label(c.heads),
                c.scores.dot,
                c.scores.kl,
                c.scores.probes,
                c.count
            );
        }
        for (attn, s) in &self.uniform {
            let used = self.cells.iter().find(|c| c.attn == *attn).map_or(0, |c| c.count);
            let _ = writeln!(out, "{attn},uniform,-,{},{},{},{used}", s.dot, s.kl, s.probes);
        }
        out
    }

    /// Cells and uniform rows back from [`AlignmentReport::to_csv`].
    pub fn cells_from_csv(text: &str) -> Result<(Vec<Cell>, BTreeMap<AttnType, Scores>)> {
        let mut cells = Vec::new();
        let mut uniform = BTreeMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(parse_err(format!("expected 7 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(e.to_string()));
            let attn: AttnType = f[0].parse()?;
            let scores = Scores {
                dot: num(f[3])?,
                kl: num(f[4])?,
                probes: num(f[5])?,
            };
            if f[1] == "uniform" {
                uniform.insert(attn, scores);
                continue;
            }
            cells.push(Cell {
                attn,
                layer: f[1].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
                heads: parse_heads(f[2]).ok_or_else(|| parse_err(format!("bad head label {}", f[2])))?,
                scores,
                count: f[6].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
            });
        }
        Ok((cells, uniform))
    }

    /// A text grid with one block per attention type, best cells marked `*`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for attn in AttnType::ALL {
            let rows: Vec<&Cell> = self.cells.iter().filter(|c| c.attn == attn).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(
                out,
                "{attn} (examples {}, skipped {})",
                rows[0].count,
                self.skipped.get(&attn).copied().unwrap_or(0)
            );
            let _ = writeln!(out, "  {:<6} {:<5} {:>8} {:>8} {:>8}", "layer", "head", "dot", "kl", "probes");
            for c in rows {
                let mark = |m: Metric| {
                    if self.argbest(m, attn).is_some_and(|b| std::ptr::eq(b, c)) {
                        "*"
                    } else {
                        " "
                    }
                };
                let _ = writeln!(
                    out,
                    "  {:<6} {:<5} {:>7.3}{} {:>7.3}{} {:>7.2}{}",
                    c.layer + 1,
                    heads_label(c.heads),
                    c.scores.dot,
                    mark(Metric::Dot),
                    c.scores.kl,
                    mark(Metric::Kl),
                    c.scores.probes,
                    mark(Metric::Probes)
                );
            }
            if let Some(u) = self.uniform.get(&attn) {
                let _ = writeln!(
                    out,
                    "  {:<6} {:<5} {:>7.3}  {:>7.3}  {:>7.2}",
                    "unif", "-", u.dot, u.kl, u.probes
                );
            }
        }
        out
    }
}

fn heads_label(h: HeadSelection) -> String {
    match h {
        HeadSelection::First => "first".into(),
        HeadSelection::Average => "avg".into(),
        HeadSelection::Head(i) => i.to_string(),
    }
}

fn parse_heads(s: &str) -> Option<HeadSelection> {
    match s {
        "first" => Some(HeadSelection::First),
        "avg" => Some(HeadSelection::Average),
        n => n.parse().ok().map(HeadSelection::Head),
    }
}

/// Query row of `attn` for an example.
pub fn query_row(ex: &EncodedScat, attn: AttnType) -> usize {
    match attn {
        AttnType::EncSelf => ex.query.src,
        AttnType::DecCross | AttnType::DecSelf => ex.query.tgt,
    }
}

/// Dot, KL and probes of one model row against a projected human vector.
pub fn score_row(human: &HumanAttentionVector, model_row: &[f64], epsilon: f64) -> Result<Scores> {
    let norm = normalize_human(human, epsilon)?;
    Ok(Scores {
        dot: dot_alignment(&human.as_f64(), model_row)?,
        kl: kl_alignment(&norm.probs, model_row)?,
        probes: probes_needed(human, model_row)? as f64,
    })
}

/// Mean scores of one fixed (type, layer, head selection) row over the
/// examples that have highlights for that type; `None` when none do.
pub fn row_scores<S: AttentionSource + ?Sized>(
    source: &S,
    examples: &[EncodedScat],
    attn: AttnType,
    layer: usize,
    heads: HeadSelection,
    epsilon: f64,
) -> Result<Option<Scores>> {
    let mut acc = Acc::default();
    for ex in examples {
        let human = match ex.projected(attn) {
            Ok(h) => h,
            Err(Error::NoHighlights) => continue,
            Err(e) => return Err(e),
        };
        let trace = source.trace(ex)?;
        let row = trace.attention_row(attn, layer, heads, query_row(ex, attn), human.len());
        acc.add(score_row(&human, &row, epsilon)?);
    }
    Ok((acc.n > 0).then(|| acc.mean()))
}

#[derive(Default, Clone, Copy)]
struct Acc {
    dot: f64,
    kl: f64,
    probes: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, s: Scores) {
        self.dot += s.dot;
        self.kl += s.kl;
        self.probes += s.probes;
        self.n += 1;
    }

    fn mean(&self) -> Scores {
        let n = self.n.max(1) as f64;
        Scores {
            dot: self.dot / n,
            kl: self.kl / n,
            probes: self.probes / n,
        }
    }
}

/// Scores every (attention type, layer, head) cell over `examples`.
///
/// An example is skipped for an attention type when its human vector has
/// no highlight in that key space; examples the source cannot trace are
/// skipped everywhere.
pub fn sweep<S: AttentionSource + ?Sized>(
    source: &S,
    examples: &[EncodedScat],
    mode: HeadMode,
    epsilon: f64,
) -> Result<AlignmentReport> {
    if examples.is_empty() {
        return Err(Error::EmptyDataset("rationale set"));
    }
    let mut layout: Option<Vec<(AttnType, usize, HeadSelection)>> = None;
    let mut cells: Vec<Acc> = Vec::new();
    let mut uniform: BTreeMap<AttnType, Acc> = BTreeMap::new();
    let mut skipped: BTreeMap<AttnType, usize> = AttnType::ALL.iter().map(|&a| (a, 0)).collect();
    let mut traced = 0;
    for ex in examples {
        let trace = match source.trace(ex) {
            Ok(t) => t,
            Err(_) => {
                skipped.values_mut().for_each(|v| *v += 1);
                continue;
            }
        };
        traced += 1;
        let layout = layout.get_or_insert_with(|| {
            let l = cell_layout(&trace, mode);
            cells = vec![Acc::default(); l.len()];
            l
        });
        for attn in AttnType::ALL {
            let human = match ex.projected(attn) {
                Ok(h) => h,
                Err(Error::NoHighlights) => {
                    *skipped.get_mut(&attn).expect("all types") += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let row = query_row(ex, attn);
            let len = human.len();
            let flat = vec![1.0 / len as f64; len];
            uniform.entry(attn).or_default().add(score_row(&human, &flat, epsilon)?);
            for (acc, &(a, layer, heads)) in cells.iter_mut().zip(layout.iter()) {
                if a != attn {
                    continue;
                }
                let model_row = trace.attention_row(attn, layer, heads, row, len);
                acc.add(score_row(&human, &model_row, epsilon)?);
            }
        }
    }
    let cells = layout
        .unwrap_or_default()
        .into_iter()
        .zip(cells)
        .map(|((attn, layer, heads), acc)| Cell {
            attn,
            layer,
            heads,
            scores: acc.mean(),
            count: acc.n,
        })
        .collect();
    Ok(AlignmentReport {
        cells,
        uniform: uniform.into_iter().map(|(a, acc)| (a, acc.mean())).collect(),
        examples: traced,
        skipped,
    })
}

fn cell_layout(trace: &ForwardTrace, mode: HeadMode) -> Vec<(AttnType, usize, HeadSelection)> {
    let mut out = Vec::new();
    for attn in AttnType::ALL {
        for (layer, heads) in trace.attention.of(attn).iter().enumerate() {
            match mode {
                HeadMode::PerHead => out.extend((0..heads.len()).map(|h| (attn, layer, HeadSelection::Head(h)))),
                HeadMode::Averaged => out.push((attn, layer, HeadSelection::Average)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spot_values() {
        assert_eq!(dot_alignment(&[0.0; 4], &[0.25; 4]).unwrap(), 0.0);
        assert_eq!(dot_alignment(&[1.0, 0.0, 1.0, 0.0], &[0.25; 4]).unwrap(), 0.5);
        let h = HumanAttentionVector(vec![0, 0, 1, 0]);
        assert_eq!(probes_needed(&h, &[0.1, 0.4, 0.3, 0.2]).unwrap(), 2);
        let h = HumanAttentionVector(vec![0, 1, 0, 0]);
        assert_eq!(probes_needed(&h, &[0.1, 0.4, 0.3, 0.2]).unwrap(), 1);
        let n = normalize_human(&HumanAttentionVector(vec![1, 0, 1, 0]), 1e-6).unwrap();
        let kl = kl_alignment(&n.probs, &[0.25; 4]).unwrap();
        assert!((kl - 0.6931).abs() < 1e-3);
        assert!(kl_alignment(&n.probs, &n.probs).unwrap().abs() <= 1e-12);
        assert!(matches!(dot_alignment(&[1.0], &[0.5, 0.5]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            probes_needed(&HumanAttentionVector(vec![0, 0]), &[0.5, 0.5]),
            Err(Error::NoHighlights)
        ));
    }

    fn brute_probes(h: &[u8], m: &[f64]) -> usize {
        // 1 + non-highlighted positions ranked ahead of the best highlighted one
        let best = (0..h.len())
            .filter(|&i| h[i] == 1)
            .min_by(|&a, &b| m[b].total_cmp(&m[a]).then(a.cmp(&b)))
            .unwrap();
        1 + (0..h.len())
            .filter(|&j| h[j] == 0 && (m[j] > m[best] || (m[j] == m[best] && j < best)))
            .count()
    }

    fn row_and_mask() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (1usize..64).prop_flat_map(|l| {
            (
                prop::collection::vec(prop_oneof![Just(0.5), 0.01f64..1.0], l),
                prop::collection::vec(0u8..2, l),
            )
        })
    }

    proptest! {
        #[test]
        fn probes_matches_rank_rule((raw, mut mask) in row_and_mask()) {
            if !mask.contains(&1) {
                mask[0] = 1;
            }
            let s: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let p = probes_needed(&HumanAttentionVector(mask.clone()), &row).unwrap();
            prop_assert_eq!(p, brute_probes(&mask, &row));
            prop_assert!(p >= 1 && p <= row.len());
            let d = dot_alignment(&HumanAttentionVector(mask).as_f64(), &row).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
        }

        #[test]
        fn uniform_identities(l in 1usize..64, k_frac in 0.0f64..1.0) {
            let k = 1 + ((l - 1) as f64 * k_frac) as usize;
            let mut bits = vec![0u8; l];
            // highlights at the end so the tie-break rule is exercised
            bits[l - k..].iter_mut().for_each(|b| *b = 1);
            let row = vec![1.0 / l as f64; l];
            let h = HumanAttentionVector(bits);
            let d = dot_alignment(&h.as_f64(), &row).unwrap();
            prop_assert!((d - k as f64 / l as f64).abs() < 1e-12);
            prop_assert_eq!(probes_needed(&h, &row).unwrap(), l - k + 1);
        }

        #[test]
        fn kl_drops_as_mass_moves_onto_highlights(l in 2usize..20, shift in 0.0f64..0.9) {
            let mut bits = vec![0u8; l];
            bits[0] = 1;
            let n = normalize_human(&HumanAttentionVector(bits), 1e-6).unwrap();
            let base = vec![1.0 / l as f64; l];
            let mut moved = vec![(1.0 - shift) / l as f64; l];
            moved[0] = (1.0 + shift * (l - 1) as f64) / l as f64;
            let a = kl_alignment(&n.probs, &base).unwrap();
            let b = kl_alignment(&n.probs, &moved).unwrap();
            prop_assert!(a >= 0.0 && b >= 0.0);
            prop_assert!(b <= a + 1e-12);
        }
    }
}
