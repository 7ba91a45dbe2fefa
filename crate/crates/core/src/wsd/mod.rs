//! Contrastive word-sense test sets forged from word-aligned, lemmatized
//! parallel text.
//!
//! Source lemma/POS tuples whose aligned target lemmas are frequent and
//! spread out (high conditional entropy) form ambiguous groups. After a
//! manual review labels each group synonymous or not, every aligned
//! occurrence of a group member yields contrastive pairs in which the
//! target word is swapped for another member.
//!
//! Input formats:
//!
//! * annotations: one line per sentence pair, `source<TAB>target`, each side
//!   space-separated `surface|lemma|POS` tokens; a line `### doc <id>` starts
//!   a new document.
//! * alignments: one line per sentence pair with space-separated `i-j`
//!   source-target token index pairs.
//! * review: one line per group, `lemma POS class` with class
//!   `synonymous`, `non-synonymous` or `reject`; `#` starts a comment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scat::ScatExample;

pub const DEFAULT_MIN_COUNT: usize = 50;
pub const DEFAULT_MIN_TARGETS: usize = 2;
pub const DEFAULT_Z: f64 = 0.3;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedToken {
    pub surface: String,
    pub lemma: String,
    pub pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedPair {
    pub src: Vec<AnnotatedToken>,
    pub tgt: Vec<AnnotatedToken>,
}

impl AnnotatedPair {
    pub fn src_text(&self) -> String {
        join_surface(&self.src)
    }

    pub fn tgt_text(&self) -> String {
        join_surface(&self.tgt)
    }
}

fn join_surface(tokens: &[AnnotatedToken]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotatedDocument {
    pub id: String,
    pub pairs: Vec<AnnotatedPair>,
}

/// Aligned `(source index, target index)` links of one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentRecord {
    pub links: Vec<(usize, usize)>,
}

fn parse_token(s: &str, line: usize) -> Result<AnnotatedToken> {
    let parts: Vec<&str> = s.split('|').collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse {
            line,
            msg: format!("expected surface|lemma|POS, found {s:?}"),
        });
    }
    Ok(AnnotatedToken {
        surface: parts[0].to_string(),
        lemma: parts[1].to_string(),
        pos: parts[2].to_string(),
    })
}

pub fn parse_annotations(text: &str) -> Result<Vec<AnnotatedDocument>> {
    let mut docs: Vec<AnnotatedDocument> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(id) = line.strip_prefix("### doc") {
            docs.push(AnnotatedDocument {
                id: id.trim().to_string(),
                pairs: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (s, t) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected source<TAB>target".into(),
        })?;
        let side = |x: &str| -> Result<Vec<AnnotatedToken>> {
            x.split_whitespace().map(|tok| parse_token(tok, line_no)).collect()
        };
        let pair = AnnotatedPair {
            src: side(s)?,
            tgt: side(t)?,
        };
        if docs.is_empty() {
            docs.push(AnnotatedDocument {
                id: "0".into(),
                pairs: Vec::new(),
            });
        }
        docs.last_mut().expect("non-empty").pairs.push(pair);
    }
    Ok(docs)
}

pub fn format_annotations(docs: &[AnnotatedDocument]) -> String {
    let side = |toks: &[AnnotatedToken]| {
        toks.iter()
            .map(|t| format!("{}|{}|{}", t.surface, t.lemma, t.pos))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    for d in docs {
        out.push_str(&format!("### doc {}\n", d.id));
        for p in &d.pairs {
            out.push_str(&format!("{}\t{}\n", side(&p.src), side(&p.tgt)));
        }
    }
    out
}

/// One record per line; blank lines are sentence pairs without links.
pub fn parse_alignments(text: &str) -> Result<Vec<AlignmentRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let links = line
                .split_whitespace()
                .map(|l| {
                    let parsed = l
                        .split_once('-')
                        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
                    parsed.ok_or_else(|| Error::Parse {
                        line: i + 1,
                        msg: format!("bad alignment link {l:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AlignmentRecord { links })
        })
        .collect()
}

pub fn format_alignments(records: &[AlignmentRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let mut s = r.links.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(" ");
            s.push('\n');
            s
        })
        .collect()
}

/// `(source lemma, POS)`.
pub type SourceKey = (String, String);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    /// `c(lemma, pos, target lemma)`.
    pub rows: BTreeMap<SourceKey, BTreeMap<String, usize>>,
    /// Aligned surface forms seen for each target lemma.
    pub surfaces: BTreeMap<String, BTreeMap<String, usize>>,
}

impl CountTable {
    pub fn marginal(&self, key: &SourceKey) -> usize {
        self.rows.get(key).map_or(0, |r| r.values().sum())
    }

    /// Most frequent aligned surface form of `lemma`; ties go to the
    /// lexicographically smallest.
    pub fn surface_of(&self, lemma: &str) -> Option<&str> {
        self.surfaces.get(lemma).and_then(|m| {
            m.iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(s, _)| s.as_str())
        })
    }

    pub fn merge(&mut self, other: &CountTable) {
        for (k, row) in &other.rows {
            let dst = self.rows.entry(k.clone()).or_default();
            for (t, c) in row {
                *dst.entry(t.clone()).or_default() += c;
            }
        }
        for (l, m) in &other.surfaces {
            let dst = self.surfaces.entry(l.clone()).or_default();
            for (s, c) in m {
                *dst.entry(s.clone()).or_default() += c;
            }
        }
    }
}

/// Flattens documents into sentence pairs, in order.
fn flat_pairs(docs: &[AnnotatedDocument]) -> Vec<&AnnotatedPair> {
    docs.iter().flat_map(|d| d.pairs.iter()).collect()
}

fn check_alignments(docs: &[AnnotatedDocument], alignments: &[AlignmentRecord]) -> Result<()> {
    let pairs = flat_pairs(docs);
    if pairs.len() != alignments.len() {
        return Err(Error::LengthMismatch {
            left: pairs.len(),
            right: alignments.len(),
        });
    }
    for (n, (p, a)) in pairs.iter().zip(alignments).enumerate() {
        for &(i, j) in &a.links {
            if i >= p.src.len() || j >= p.tgt.len() {
                return Err(Error::OutOfRange(format!(
                    "alignment {i}-{j} in sentence pair {n} with {} source and {} target tokens",
                    p.src.len(),
                    p.tgt.len()
                )));
            }
        }
    }
    Ok(())
}

/// Counts aligned (source lemma, POS, target lemma) triples.
pub fn accumulate_counts(docs: &[AnnotatedDocument], alignments: &[AlignmentRecord]) -> Result<CountTable> {
    check_alignments(docs, alignments)?;
    let mut table = CountTable::default();
    for (p, a) in flat_pairs(docs).into_iter().zip(alignments) {
        for &(i, j) in &a.links {
            let s = &p.src[i];
            let t = &p.tgt[j];
            *table
                .rows
                .entry((s.lemma.clone(), s.pos.clone()))
                .or_default()
                .entry(t.lemma.clone())
                .or_default() += 1;
            *table
                .surfaces
                .entry(t.lemma.clone())
                .or_default()
                .entry(t.surface.clone())
                .or_default() += 1;
        }
    }
    Ok(table)
}

/// Natural-log entropy of the conditional target distribution of a row.
pub fn entropy(row: &BTreeMap<String, usize>) -> Result<f64> {
    let total: usize = row.values().sum();
    if total == 0 {
        return Err(Error::InvalidConfig("entropy of a row with zero marginal".into()));
    }
    let n = total as f64;
    Ok(row
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupClass {
    Synonymous,
    NonSynonymous,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousGroup {
    pub lemma: String,
    pub pos: String,
    /// Target lemmas with at least `min_count` links, most frequent first.
    pub targets: Vec<(String, usize)>,
    /// Entropy of the full row.
    pub entropy: f64,
    pub class: GroupClass,
}

impl AmbiguousGroup {
    pub fn key(&self) -> SourceKey {
        (self.lemma.clone(), self.pos.clone())
    }

    pub fn has_target(&self, lemma: &str) -> bool {
        self.targets.iter().any(|(t, _)| t == lemma)
    }
}

/// Rows with at least `min_targets` target lemmas linked `min_count` times
/// or more and entropy at least `z`, by descending entropy (ties by key).
pub fn extract_groups(table: &CountTable, min_count: usize, min_targets: usize, z: f64) -> Vec<AmbiguousGroup> {
    let mut groups = Vec::new();
    for ((lemma, pos), row) in &table.rows {
        let mut targets: Vec<(String, usize)> = row
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, &c)| (t.clone(), c))
            .collect();
        if targets.len() < min_targets.max(1) {
            continue;
        }
        let Ok(h) = entropy(row) else { continue };
        if h < z {
            continue;
        }
        targets.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        groups.push(AmbiguousGroup {
            lemma: lemma.clone(),
            pos: pos.clone(),
            targets,
            entropy: h,
            class: GroupClass::Unclassified,
        });
    }
    groups.sort_by(|a, b| b.entropy.total_cmp(&a.entropy).then(a.key().cmp(&b.key())));
    groups
}

/// Review decisions keyed by `(lemma, POS)`; `None` means rejected.
pub fn parse_review(text: &str) -> Result<BTreeMap<SourceKey, Option<GroupClass>>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: i + 1,
                msg: "expected `lemma POS class`".into(),
            });
        }
        let class = match f[2] {
            "synonymous" => Some(GroupClass::Synonymous),
            "non-synonymous" => Some(GroupClass::NonSynonymous),
            "reject" => None,
            other => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unknown class {other:?}"),
                })
            }
        };
        out.insert((f[0].to_string(), f[1].to_string()), class);
    }
    Ok(out)
}

/// Sets classes from a review; rejected groups are removed, unlisted ones
/// stay unclassified.
pub fn apply_review(groups: Vec<AmbiguousGroup>, review: &BTreeMap<SourceKey, Option<GroupClass>>) -> Vec<AmbiguousGroup> {
    groups
        .into_iter()
        .filter_map(|mut g| match review.get(&g.key()) {
            Some(None) => None,
            Some(Some(c)) => {
                g.class = *c;
                Some(g)
            }
            None => Some(g),
        })
        .collect()
}

/// Review template listing every candidate as unclassified.
pub fn review_template(groups: &[AmbiguousGroup]) -> String {
    let mut out = String::from("# lemma POS class (synonymous | non-synonymous | reject)\n");
    for g in groups {
        let targets: Vec<String> = g.targets.iter().map(|(t, c)| format!("{t}:{c}")).collect();
        out.push_str(&format!("# {} H={:.4}\n", targets.join(" "), g.entropy));
        out.push_str(&format!("{} {} non-synonymous\n", g.lemma, g.pos));
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForgeOutput {
    pub pairs: Vec<ScatExample>,
    pub warnings: Vec<String>,
}

/// Emits one contrastive example per aligned occurrence of a group's
/// target lemma and per alternative member. Synonymous groups also require
/// the correct lemma within the previous `window` target sentences of the
/// same document. Only the aligned occurrence is swapped, using the most
/// frequent aligned surface form of the substitute.
pub fn make_contrastive(
    docs: &[AnnotatedDocument],
    alignments: &[AlignmentRecord],
    groups: &[AmbiguousGroup],
    table: &CountTable,
    window: usize,
) -> Result<ForgeOutput> {
    check_alignments(docs, alignments)?;
    let mut out = ForgeOutput::default();
    let mut active: BTreeMap<SourceKey, &AmbiguousGroup> = BTreeMap::new();
    for g in groups {
        if g.class == GroupClass::Unclassified {
            out.warnings.push(format!("skipping unclassified group {} {}", g.lemma, g.pos));
        } else {
            active.insert(g.key(), g);
        }
    }
    let mut records = alignments.iter();
    for doc in docs {
        for (j, pair) in doc.pairs.iter().enumerate() {
            let links = &records.next().expect("checked length").links;
            let mut seen: BTreeSet<(usize, String)> = BTreeSet::new();
            for &(si, ti) in links {
                let s = &pair.src[si];
                let Some(group) = active.get(&(s.lemma.clone(), s.pos.clone())) else {
                    continue;
                };
                let t = &pair.tgt[ti];
                if !group.has_target(&t.lemma) {
                    continue;
                }
                if group.class == GroupClass::Synonymous {
                    let start = j.saturating_sub(window);
                    let recent = doc.pairs[start..j]
                        .iter()
                        .any(|p| p.tgt.iter().any(|w| w.lemma == t.lemma));
                    if !recent {
                        continue;
                    }
                }
                for (alt, _) in &group.targets {
                    if *alt == t.lemma || !seen.insert((ti, alt.clone())) {
                        continue;
                    }
                    let Some(surface) = table.surface_of(alt) else { continue };
                    if surface == t.surface {
                        continue;
                    }
                    let mut incorrect: Vec<&str> = pair.tgt.iter().map(|w| w.surface.as_str()).collect();
                    incorrect[ti] = surface;
                    let ctx_start = j.saturating_sub(window);
                    let ctx = &doc.pairs[ctx_start..j];
                    out.pairs.push(ScatExample {
                        id: format!("{}:{j}:{ti}:{alt}", doc.id),
                        ctx_src: ctx.iter().map(AnnotatedPair::src_text).collect(),
                        ctx_tgt: ctx.iter().map(AnnotatedPair::tgt_text).collect(),
                        src: pair.src_text(),
                        tgt_correct: pair.tgt_text(),
                        tgt_incorrect: incorrect.join(" "),
                        pron_src_idx: si,
                        pron_tgt_idx: ti,
                        hl_src: Vec::new(),
                        hl_tgt: Vec::new(),
                        ctx_level: format!("{}+{}", ctx.len(), ctx.len()),
                        confidence: String::new(),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: &[(&str, usize)]) -> BTreeMap<String, usize> {
        v.iter().map(|(k, c)| (k.to_string(), *c)).collect()
    }

    fn tok(s: &str) -> AnnotatedToken {
        let p: Vec<&str> = s.split('|').collect();
        AnnotatedToken {
            surface: p[0].into(),
            lemma: p[1].into(),
            pos: p[2].into(),
        }
    }

    fn nail_pair(target: &str) -> AnnotatedPair {
        AnnotatedPair {
            src: vec![tok("the|the|DET"), tok("nail|nail|NOUN")],
            tgt: vec![tok("le|le|DET"), tok(&format!("{target}|{target}|NOUN"))],
        }
    }

    #[test]
    fn entropy_spot_values() {
        assert!((entropy(&row(&[("clou", 60), ("ongle", 60)])).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&row(&[("clou", 7)])).unwrap(), 0.0);
        assert!((entropy(&row(&[("a", 95), ("b", 5)])).unwrap() - 0.1985).abs() < 1e-4);
        assert!(entropy(&row(&[])).is_err());
    }

    #[test]
    fn counts_are_additive() {
        let doc = AnnotatedDocument {
            id: "d".into(),
            pairs: vec![nail_pair("clou")],
        };
        let al = vec![AlignmentRecord { links: vec![(0, 0), (1, 1)] }];
        let t = accumulate_counts(&[doc.clone()], &al).unwrap();
        let key = ("nail".to_string(), "NOUN".to_string());
        assert_eq!(t.rows[&key]["clou"], 1);
        let twice = AnnotatedDocument {
            id: "d".into(),
            pairs: vec![nail_pair("clou"), nail_pair("clou")],
        };
        let t = accumulate_counts(&[twice], &[al[0].clone(), al[0].clone()]).unwrap();
        assert_eq!(t.rows[&key]["clou"], 2);
        assert_eq!(t.marginal(&key), 2);
        let bad = vec![AlignmentRecord { links: vec![(2, 0)] }];
        assert!(matches!(accumulate_counts(&[doc], &bad), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn group_filters() {
        let mut t = CountTable::default();
        t.rows.insert(("nail".into(), "NOUN".into()), row(&[("clou", 60), ("ongle", 60)]));
        t.rows.insert(("bank".into(), "NOUN".into()), row(&[("banque", 95), ("rive", 5)]));
        let g = extract_groups(&t, 50, 2, 0.5);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].lemma, "nail");
        assert!(extract_groups(&CountTable::default(), 50, 2, 0.3).is_empty());
    }

    #[test]
    fn swap_and_synonymous_window() {
        let mk = |tgts: &[&str]| AnnotatedDocument {
            id: "d".into(),
            pairs: tgts.iter().map(|t| nail_pair(t)).collect(),
        };
        let links = |n: usize| vec![AlignmentRecord { links: vec![(0, 0), (1, 1)] }; n];
        let doc = mk(&["clou", "ongle"]);
        let table = accumulate_counts(&[doc.clone()], &links(2)).unwrap();
        let mut g = extract_groups(&table, 1, 2, 0.0);
        g[0].class = GroupClass::NonSynonymous;
        let out = make_contrastive(&[doc.clone()], &links(2), &g, &table, 5).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert_eq!(out.pairs[0].tgt_correct, "le clou");
        assert_eq!(out.pairs[0].tgt_incorrect, "le ongle");
        g[0].class = GroupClass::Synonymous;
        let out = make_contrastive(&[doc], &links(2), &g, &table, 5).unwrap();
        // neither word occurred earlier in the document
        assert!(out.pairs.is_empty());
        let doc = mk(&["clou", "ongle", "clou"]);
        let table = accumulate_counts(&[doc.clone()], &links(3)).unwrap();
        let out = make_contrastive(&[doc], &links(3), &g, &table, 5).unwrap();
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].id, "d:2:1:ongle");
        g[0].class = GroupClass::Unclassified;
        let doc = mk(&["clou"]);
        let out = make_contrastive(&[doc], &links(1), &g, &table, 5).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn file_formats_round_trip() {
        let docs = vec![AnnotatedDocument {
            id: "a".into(),
            pairs: vec![nail_pair("clou"), nail_pair("ongle")],
        }];
        assert_eq!(parse_annotations(&format_annotations(&docs)).unwrap(), docs);
        let al = vec![
            AlignmentRecord { links: vec![(0, 0), (1, 1)] },
            AlignmentRecord { links: vec![] },
        ];
        assert_eq!(parse_alignments(&format_alignments(&al)).unwrap(), al);
        assert!(parse_alignments("0-x").is_err());
        assert!(parse_annotations("a|b\tc|d|e").is_err());
        let review = parse_review("nail NOUN synonymous\nbank NOUN reject # too skewed\n").unwrap();
        assert_eq!(review.len(), 2);
        assert!(parse_review("nail NOUN maybe").is_err());
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_scale_invariance(counts in prop::collection::vec(1usize..200, 1..8), k in 1usize..5) {
            let r: BTreeMap<String, usize> = counts.iter().enumerate().map(|(i, &c)| (i.to_string(), c)).collect();
            let h = entropy(&r).unwrap();
            prop_assert!(h >= -1e-12 && h <= (counts.len() as f64).ln() + 1e-12);
            let scaled: BTreeMap<String, usize> = r.iter().map(|(k2, c)| (k2.clone(), c * k)).collect();
            prop_assert!((entropy(&scaled).unwrap() - h).abs() < 1e-12);
        }

        #[test]
        fn raising_z_never_adds(rows in prop::collection::vec(prop::collection::vec(0usize..120, 1..5), 1..6), z1 in 0.0f64..1.5, dz in 0.0f64..1.0) {
            let mut t = CountTable::default();
            for (i, r) in rows.iter().enumerate() {
                t.rows.insert((format!("w{i}"), "NOUN".into()), r.iter().enumerate().map(|(j, &c)| (format!("t{j}"), c)).collect());
            }
            let lo: BTreeSet<SourceKey> = extract_groups(&t, 50, 2, z1).iter().map(AmbiguousGroup::key).collect();
            let hi: BTreeSet<SourceKey> = extract_groups(&t, 50, 2, z1 + dz).iter().map(AmbiguousGroup::key).collect();
            prop_assert!(hi.is_subset(&lo));
        }
    }
}
