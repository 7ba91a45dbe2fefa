use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered list of (source, target) sentence pairs in discourse order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelDocument {
    pub id: String,
    pub pairs: Vec<(String, String)>,
}

impl ParallelDocument {
    pub fn new(id: impl Into<String>, pairs: Vec<(String, String)>) -> Result<Self> {
        let id = id.into();
        if pairs.iter().any(|(s, t)| s.contains('\n') || t.contains('\n')) {
            return Err(Error::InvalidConfig(format!(
                "document {id}: sentences must be single lines"
            )));
        }
        Ok(ParallelDocument { id, pairs })
    }

    pub fn from_sides(id: impl Into<String>, sources: Vec<String>, targets: Vec<String>) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: sources.len(),
                right: targets.len(),
            });
        }
        Self::new(id, sources.into_iter().zip(targets).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.0.as_str())
    }

    pub fn targets(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.1.as_str())
    }
}

const DOC_HEADER: &str = "### doc ";

/// Parses the block corpus format: a `### doc <id>` header line followed by
/// one `source\ttarget` line per sentence. Blank lines are ignored.
pub fn parse_corpus(text: &str) -> Result<Vec<ParallelDocument>> {
    let mut docs: Vec<ParallelDocument> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(id) = line.strip_prefix(DOC_HEADER) {
            docs.push(ParallelDocument {
                id: id.trim().to_string(),
                pairs: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let doc = docs.last_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "sentence pair before the first document header".into(),
        })?;
        let (src, tgt) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected tab-separated source and target".into(),
        })?;
        if tgt.contains('\t') {
            return Err(Error::Parse {
                line: line_no,
                msg: "more than one tab".into(),
            });
        }
        doc.pairs.push((src.to_string(), tgt.to_string()));
    }
    Ok(docs)
}

pub fn format_corpus(docs: &[ParallelDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(DOC_HEADER);
        out.push_str(&d.id);
        out.push('\n');
        for (s, t) in &d.pairs {
            out.push_str(s);
            out.push('\t');
            out.push_str(t);
            out.push('\n');
        }
    }
    out
}

pub fn read_corpus(path: &Path) -> Result<Vec<ParallelDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn write_corpus(path: &Path, docs: &[ParallelDocument]) -> Result<()> {
    crate::report::write_atomic(path, format_corpus(docs).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_blocks() {
        let text = "### doc a\nhello .\tbonjour .\nit is .\til est .\n\n### doc b\nyes\toui\n";
        let docs = parse_corpus(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[0].pairs[1], ("it is .".into(), "il est .".into()));
        assert_eq!(format_corpus(&docs), text.replace("\n\n", "\n"));
    }

    #[test]
    fn rejects_missing_tab() {
        let err = parse_corpus("### doc a\nno tab here\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn rejects_orphan_pair() {
        assert!(parse_corpus("a\tb\n").is_err());
    }

    #[test]
    fn unequal_sides_rejected() {
        assert!(ParallelDocument::from_sides("x", vec!["a".into()], vec![]).is_err());
    }
}
