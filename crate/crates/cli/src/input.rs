use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dpndd::treebank::{parse_conll, parse_treebank, read_span_list, LabeledTree, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Auto,
    /// PTB-style bracketed trees.
    Bracket,
    /// Span-list JSON lines.
    Jsonl,
    /// One sentence per line of `word/TAG` tokens.
    Tagged,
    /// Column format with BIO/IOBES tags in the last column.
    Conll,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Format::Auto),
            "bracket" | "ptb" => Ok(Format::Bracket),
            "jsonl" | "json" => Ok(Format::Jsonl),
            "tagged" => Ok(Format::Tagged),
            "conll" => Ok(Format::Conll),
            other => Err(format!("unknown format {other:?} (auto, bracket, jsonl, tagged, conll)")),
        }
    }
}

fn detect(path: &Path, text: &str) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "json") => return Format::Jsonl,
        Some("conll" | "bio" | "iob") => return Format::Conll,
        Some("mrg" | "ptb") => return Format::Bracket,
        _ => {}
    }
    match text.trim_start().chars().next() {
        Some('(') => Format::Bracket,
        Some('{' | '[') => Format::Jsonl,
        _ => Format::Tagged,
    }
}

fn parse_tagged(text: &str) -> Result<Vec<LabeledTree>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut pairs = Vec::new();
        for tok in line.split_whitespace() {
            let Some((word, tag)) = tok.rsplit_once('/').filter(|(w, t)| !w.is_empty() && !t.is_empty()) else {
                bail!("line {}: expected word/TAG, got {tok:?}", i + 1);
            };
            pairs.push((word, tag));
        }
        out.push(LabeledTree::flat(Sentence::from_tagged(&pairs)));
    }
    Ok(out)
}

/// Reads trees (or bare tagged sentences as span-less trees); `-` is stdin.
pub fn read_trees(path: &Path, format: Format) -> Result<Vec<LabeledTree>> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    let format = match format {
        Format::Auto => detect(path, &text),
        f => f,
    };
    let trees = match format {
        Format::Bracket => parse_treebank(&text)?,
        Format::Jsonl => read_span_list(&text)?,
        Format::Tagged => parse_tagged(&text)?,
        Format::Conll => parse_conll(&text)?,
        Format::Auto => unreachable!(),
    };
    Ok(trees)
}
