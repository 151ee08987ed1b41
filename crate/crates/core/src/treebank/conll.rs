//! CoNLL column files with BIO-style entity tags in the last column.
//!
//! Both IOB1 (CoNLL-03: `I-X` opens an entity unless it continues one of type
//! `X`) and IOB2/IOBES tags are accepted. When a line has three or more
//! columns the second is taken as the POS tag.

use std::path::Path;

use super::{LabeledSpan, LabeledTree, Sentence, TreebankError};

struct Open {
    start: usize,
    label: String,
}

fn close(open: &mut Option<Open>, end: usize, spans: &mut Vec<LabeledSpan>) {
    if let Some(o) = open.take() {
        spans.push(LabeledSpan::new(o.start, end, o.label));
    }
}

fn finish(
    sentence: &mut Sentence,
    spans: &mut Vec<LabeledSpan>,
    open: &mut Option<Open>,
    out: &mut Vec<LabeledTree>,
) -> Result<(), TreebankError> {
    close(open, sentence.len(), spans);
    if !sentence.is_empty() {
        out.push(LabeledTree::new(
            std::mem::take(sentence),
            std::mem::take(spans),
        )?);
    }
    Ok(())
}

pub fn parse_conll(text: &str) -> Result<Vec<LabeledTree>, TreebankError> {
    let mut out = Vec::new();
    let mut sentence = Sentence::default();
    let mut spans = Vec::new();
    let mut open: Option<Open> = None;

    for (lineno, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() || cols[0] == "-DOCSTART-" {
            finish(&mut sentence, &mut spans, &mut open, &mut out)?;
            continue;
        }
        if cols.len() < 2 {
            return Err(TreebankError::Format {
                line: lineno + 1,
                message: "expected at least a word and a tag column".into(),
            });
        }
        let tag = cols[cols.len() - 1];
        let pos = if cols.len() >= 3 { cols[1] } else { "X" };
        sentence.words.push(cols[0].to_string());
        sentence.pos_tags.push(pos.to_string());
        let k = sentence.len();

        if tag == "O" {
            close(&mut open, k - 1, &mut spans);
            continue;
        }
        let (prefix, label) = tag.split_once('-').ok_or_else(|| TreebankError::Format {
            line: lineno + 1,
            message: format!("unrecognized tag {tag:?}"),
        })?;
        let continues = matches!(&open, Some(o) if o.label == label);
        match prefix {
            "B" | "S" => {
                close(&mut open, k - 1, &mut spans);
                open = Some(Open {
                    start: k,
                    label: label.to_string(),
                });
            }
            "I" | "E" if continues => {}
            "I" | "E" => {
                close(&mut open, k - 1, &mut spans);
                open = Some(Open {
                    start: k,
                    label: label.to_string(),
                });
            }
            _ => {
                return Err(TreebankError::Format {
                    line: lineno + 1,
                    message: format!("unrecognized tag prefix in {tag:?}"),
                })
            }
        }
        if prefix == "S" || prefix == "E" {
            close(&mut open, k, &mut spans);
        }
    }
    finish(&mut sentence, &mut spans, &mut open, &mut out)?;
    Ok(out)
}

pub fn read_conll_file(path: impl AsRef<Path>) -> Result<Vec<LabeledTree>, TreebankError> {
    parse_conll(&std::fs::read_to_string(path)?)
}
