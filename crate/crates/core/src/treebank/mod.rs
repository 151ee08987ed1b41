//! Sentences, labeled span sets and their on-disk formats.
//!
//! Spans are 1-based and inclusive on both ends throughout the crate:
//! `(1, n)` covers an `n`-word sentence.

mod alignment;
mod bracket;
mod conll;
mod spanlist;
mod wsj10;

pub use alignment::{EncodedSentence, SubwordAlignment, Vocabulary, WordPieceTokenizer};
pub use bracket::{emit_bracket, parse_bracket, parse_treebank, read_treebank_file};
pub use conll::{parse_conll, read_conll_file};
pub use spanlist::{read_span_list, read_span_list_file, write_span_list};
pub use wsj10::{
    build_wsj10, is_punctuation, read_wsj_sections, wsj_section_files, Wsj10Options, PUNCTUATION_TAGS, WSJ10_LABELS,
    WSJ10_SECTIONS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("malformed bracket at byte {offset}: {message}")]
    MalformedBracket { offset: usize, message: String },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A 1-based inclusive word span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start >= 1 && start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// True when the spans partially overlap: `s < s' <= t < t'` or the mirror case.
    pub fn crosses(&self, other: &Span) -> bool {
        let (s, t, s2, t2) = (self.start, self.end, other.start, other.end);
        (s < s2 && s2 <= t && t < t2) || (s2 < s && s <= t2 && t2 < t)
    }

    /// Non-strict containment.
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl LabeledSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        LabeledSpan {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn span(&self) -> Span {
        Span {
            start: self.start,
            end: self.end,
        }
    }
}

/// Words with parallel POS tags.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Sentence {
    pub words: Vec<String>,
    pub pos_tags: Vec<String>,
}

impl Sentence {
    pub fn new(words: Vec<String>, pos_tags: Vec<String>) -> Result<Self, TreebankError> {
        if words.len() != pos_tags.len() {
            return Err(TreebankError::InvalidTree(format!(
                "{} words but {} POS tags",
                words.len(),
                pos_tags.len()
            )));
        }
        Ok(Sentence { words, pos_tags })
    }

    /// Builds a sentence from `(word, tag)` pairs.
    pub fn from_tagged<W: AsRef<str>, P: AsRef<str>>(pairs: &[(W, P)]) -> Self {
        Sentence {
            words: pairs.iter().map(|(w, _)| w.as_ref().to_string()).collect(),
            pos_tags: pairs.iter().map(|(_, p)| p.as_ref().to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words of a 1-based inclusive span.
    pub fn span_words(&self, span: Span) -> &[String] {
        &self.words[span.start - 1..span.end]
    }
}

/// A sentence with its labeled constituents.
///
/// The same `(s, t)` may appear several times under different labels (unary
/// chains). Spans are kept in pre-order: ascending start, descending end,
/// outer before inner for identical extents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTree {
    pub sentence: Sentence,
    pub spans: Vec<LabeledSpan>,
}

impl LabeledTree {
    pub fn new(sentence: Sentence, mut spans: Vec<LabeledSpan>) -> Result<Self, TreebankError> {
        if sentence.words.len() != sentence.pos_tags.len() {
            return Err(TreebankError::InvalidTree("words and POS tags differ in length".into()));
        }
        let n = sentence.len();
        for sp in &spans {
            if sp.start < 1 || sp.start > sp.end || sp.end > n {
                return Err(TreebankError::InvalidTree(format!(
                    "span ({}, {}) out of range for {n} words",
                    sp.start, sp.end
                )));
            }
        }
        for (a_idx, a) in spans.iter().enumerate() {
            for b in &spans[a_idx + 1..] {
                if a.span().crosses(&b.span()) {
                    return Err(TreebankError::InvalidTree(format!(
                        "spans ({}, {}) and ({}, {}) cross",
                        a.start, a.end, b.start, b.end
                    )));
                }
            }
        }
        spans.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
        Ok(LabeledTree { sentence, spans })
    }

    /// A tree without constituents.
    pub fn flat(sentence: Sentence) -> Self {
        LabeledTree {
            sentence,
            spans: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }

    /// Distinct extents in pre-order.
    pub fn distinct_spans(&self) -> Vec<Span> {
        let mut out: Vec<Span> = Vec::new();
        for sp in &self.spans {
            if !out.contains(&sp.span()) {
                out.push(sp.span());
            }
        }
        out
    }

    /// Keeps only spans whose label satisfies `keep`.
    pub fn retain_labels(&mut self, keep: impl Fn(&str) -> bool) {
        self.spans.retain(|s| keep(&s.label));
    }

    /// Removes the words whose POS satisfies `drop`, shrinking spans to the
    /// remaining words and discarding spans left empty.
    pub fn remove_words(&self, drop: impl Fn(&str) -> bool) -> LabeledTree {
        let keep: Vec<bool> = self.sentence.pos_tags.iter().map(|p| !drop(p)).collect();
        // new 1-based index of each kept word
        let mut new_index = vec![0usize; keep.len()];
        let mut next = 0;
        for (i, k) in keep.iter().enumerate() {
            if *k {
                next += 1;
                new_index[i] = next;
            }
        }
        let mut sentence = Sentence::default();
        for (i, k) in keep.iter().enumerate() {
            if *k {
                sentence.words.push(self.sentence.words[i].clone());
                sentence.pos_tags.push(self.sentence.pos_tags[i].clone());
            }
        }
        let spans = self
            .spans
            .iter()
            .filter_map(|sp| {
                let kept: Vec<usize> = (sp.start - 1..sp.end)
                    .filter(|&i| keep[i])
                    .map(|i| new_index[i])
                    .collect();
                Some(LabeledSpan::new(*kept.first()?, *kept.last()?, sp.label.clone()))
            })
            .collect();
        LabeledTree { sentence, spans }
    }
}
