//! JSON span lists: `{"words": [...], "pos": [...], "spans": [[s, t, "label"], ...]}`,
//! one object per line (a single top-level array is accepted on input).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledSpan, LabeledTree, Sentence, TreebankError};

#[derive(Serialize, Deserialize)]
struct Record {
    words: Vec<String>,
    #[serde(default)]
    pos: Vec<String>,
    #[serde(default)]
    spans: Vec<(usize, usize, String)>,
}

fn to_tree(rec: Record, line: usize) -> Result<LabeledTree, TreebankError> {
    let pos = if rec.pos.is_empty() {
        vec!["X".to_string(); rec.words.len()]
    } else {
        rec.pos
    };
    let sentence = Sentence::new(rec.words, pos).map_err(|e| TreebankError::Format {
        line,
        message: e.to_string(),
    })?;
    let spans = rec
        .spans
        .into_iter()
        .map(|(s, t, l)| LabeledSpan::new(s, t, l))
        .collect();
    LabeledTree::new(sentence, spans).map_err(|e| TreebankError::Format {
        line,
        message: e.to_string(),
    })
}

pub fn read_span_list(text: &str) -> Result<Vec<LabeledTree>, TreebankError> {
    if text.trim_start().starts_with('[') {
        let recs: Vec<Record> = serde_json::from_str(text)?;
        return recs
            .into_iter()
            .enumerate()
            .map(|(i, r)| to_tree(r, i + 1))
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| TreebankError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(to_tree(rec, i + 1)?);
    }
    Ok(out)
}

pub fn read_span_list_file(path: impl AsRef<Path>) -> Result<Vec<LabeledTree>, TreebankError> {
    read_span_list(&std::fs::read_to_string(path)?)
}

/// One JSON object per line, newline-terminated.
pub fn write_span_list(trees: &[LabeledTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        let rec = Record {
            words: tree.sentence.words.clone(),
            pos: tree.sentence.pos_tags.clone(),
            spans: tree
                .spans
                .iter()
                .map(|s| (s.start, s.end, s.label.clone()))
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    out
}
