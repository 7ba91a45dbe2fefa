//! Adapter from the public SCAT release layout to the JSON-lines schema.
//!
//! The release ships line-aligned files:
//!
//! * `highlighted.en` / `highlighted.fr`: the current source / target
//!   sentence, with the ambiguous pronoun wrapped in `<p>...</p>` and
//!   supporting words wrapped in `<hon>...<hoff>`.
//! * `context.en` / `context.fr`: the preceding sentences of the same line,
//!   oldest first, separated by `<brk>`, with the same highlight markers.
//!
//! The incorrect target is the correct one with the marked French pronoun
//! swapped for its other gender (`il`/`elle`, `ils`/`elles`); lines whose
//! marked pronoun has no counterpart are skipped and reported.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{Highlight, ScatExample};
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvertReport {
    pub converted: usize,
    pub skipped: Vec<(usize, String)>,
}

#[derive(Debug, Default)]
struct Marked {
    tokens: Vec<String>,
    highlights: Vec<usize>,
    pronoun: Option<usize>,
}

fn parse_marked(text: &str) -> Marked {
    let spaced = text
        .replace("<hon>", " <hon> ")
        .replace("<hoff>", " <hoff> ")
        .replace("<p>", " <p> ")
        .replace("</p>", " </p> ");
    let mut m = Marked::default();
    let mut in_hl = false;
    let mut in_p = false;
    for chunk in spaced.split_whitespace() {
        match chunk {
            "<hon>" => in_hl = true,
            "<hoff>" => in_hl = false,
            "<p>" => in_p = true,
            "</p>" => in_p = false,
            _ => {
                for tok in tokenize(chunk) {
                    if in_hl {
                        m.highlights.push(m.tokens.len());
                    }
                    if in_p && m.pronoun.is_none() {
                        m.pronoun = Some(m.tokens.len());
                    }
                    m.tokens.push(tok);
                }
            }
        }
    }
    m
}

fn split_context(text: &str) -> Vec<Marked> {
    if text.trim().is_empty() {
        return Vec::new();
    }
    text.split("<brk>").map(parse_marked).collect()
}

fn swap_pronoun(word: &str) -> Option<&'static str> {
    Some(match word.to_lowercase().as_str() {
        "il" => "elle",
        "elle" => "il",
        "ils" => "elles",
        "elles" => "ils",
        _ => return None,
    })
}

fn collect_highlights(context: &[Marked], current: &Marked) -> Vec<Highlight> {
    let n = context.len() as i32;
    let mut out: Vec<Highlight> = context
        .iter()
        .enumerate()
        .flat_map(|(k, m)| m.highlights.iter().map(move |&i| (k as i32 - n, i)))
        .collect();
    out.extend(current.highlights.iter().map(|&i| (0, i)));
    out
}

fn convert_line(id: usize, src: &str, tgt: &str, ctx_src: &str, ctx_tgt: &str) -> std::result::Result<ScatExample, String> {
    let cur_src = parse_marked(src);
    let cur_tgt = parse_marked(tgt);
    let ctx_s = split_context(ctx_src);
    let ctx_t = split_context(ctx_tgt);
    let pron_src = cur_src.pronoun.ok_or("no <p> marker in source")?;
    let pron_tgt = cur_tgt.pronoun.ok_or("no <p> marker in target")?;
    let swapped = swap_pronoun(&cur_tgt.tokens[pron_tgt])
        .ok_or_else(|| format!("no gender counterpart for {:?}", cur_tgt.tokens[pron_tgt]))?;
    let mut incorrect = cur_tgt.tokens.clone();
    incorrect[pron_tgt] = swapped.to_string();
    let ex = ScatExample {
        id: id.to_string(),
        ctx_src: ctx_s.iter().map(|m| m.tokens.join(" ")).collect(),
        ctx_tgt: ctx_t.iter().map(|m| m.tokens.join(" ")).collect(),
        src: cur_src.tokens.join(" "),
        tgt_correct: cur_tgt.tokens.join(" "),
        tgt_incorrect: incorrect.join(" "),
        pron_src_idx: pron_src,
        pron_tgt_idx: pron_tgt,
        hl_src: collect_highlights(&ctx_s, &cur_src),
        hl_tgt: collect_highlights(&ctx_t, &cur_tgt),
        ctx_level: format!("{}+{}", ctx_s.len(), ctx_t.len()),
        confidence: String::new(),
    };
    ex.validate().map_err(|e| e.to_string())?;
    Ok(ex)
}

fn read_lines(dir: &Path, name: &str) -> Result<Vec<String>> {
    let p = dir.join(name);
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Converts a release directory; context files are optional (0+0).
pub fn convert_release(dir: &Path) -> Result<(Vec<ScatExample>, ConvertReport)> {
    let src = read_lines(dir, "highlighted.en")?;
    let tgt = read_lines(dir, "highlighted.fr")?;
    if src.len() != tgt.len() {
        return Err(Error::LengthMismatch {
            left: src.len(),
            right: tgt.len(),
        });
    }
    let optional = |name: &str| -> Result<Vec<String>> {
        if dir.join(name).exists() {
            read_lines(dir, name)
        } else {
            Ok(vec![String::new(); src.len()])
        }
    };
    let ctx_src = optional("context.en")?;
    let ctx_tgt = optional("context.fr")?;
    if ctx_src.len() != src.len() || ctx_tgt.len() != src.len() {
        return Err(Error::LengthMismatch {
            left: src.len(),
            right: ctx_src.len().min(ctx_tgt.len()),
        });
    }
    let mut report = ConvertReport::default();
    let mut out = Vec::new();
    for i in 0..src.len() {
        match convert_line(i, &src[i], &tgt[i], &ctx_src[i], &ctx_tgt[i]) {
            Ok(ex) => out.push(ex),
            Err(msg) => report.skipped.push((i + 1, msg)),
        }
    }
    report.converted = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_marked_line() {
        let ex = convert_line(
            7,
            "Yes, <p>it</p>'s in the infirmary.",
            "Oui, <p>il</p> est à l'infirmerie.",
            "Have we got her report?",
            "On dispose de son <hon>rapport<hoff> ?",
        )
        .unwrap();
        assert_eq!(ex.src, "Yes , it ' s in the infirmary .");
        assert_eq!(ex.pron_src_idx, 2);
        assert_eq!(ex.pron_tgt_idx, 2);
        assert_eq!(ex.tgt_incorrect, "Oui , elle est à l ' infirmerie .");
        assert_eq!(ex.hl_tgt, vec![(-1, 4)]);
        assert!(ex.hl_src.is_empty());
        assert_eq!(ex.ctx_level, "1+1");
    }

    #[test]
    fn unswappable_pronoun_skipped() {
        assert!(convert_line(0, "<p>it</p> works", "<p>ça</p> marche", "", "").is_err());
    }

    #[test]
    fn converts_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("highlighted.en"), "<p>it</p> is red .\n<p>it</p> is .\n").unwrap();
        fs::write(dir.path().join("highlighted.fr"), "<p>elle</p> est rouge .\n<p>ça</p> est .\n").unwrap();
        fs::write(dir.path().join("context.en"), "the <hon>car<hoff> . <brk> ok .\n\n").unwrap();
        fs::write(dir.path().join("context.fr"), "la <hon>voiture<hoff> . <brk> ok .\n\n").unwrap();
        let (exs, rep) = convert_release(dir.path()).unwrap();
        assert_eq!(rep.converted, 1);
        assert_eq!(rep.skipped.len(), 1);
        assert_eq!(exs[0].hl_src, vec![(-2, 1)]);
        assert_eq!(exs[0].ctx_level, "2+2");
    }
}
