//! Molds and the dual To-Mold / From-Mold score.
//!
//! A mold is a reference sentence with one labeled constituent marked. A
//! candidate span of another sentence is scored against it twice: pasted into
//! the mold's slot (To-Mold) and with the mold's constituent pasted into the
//! candidate's slot (From-Mold). Both are POS-NDD values; their sum is the
//! DP-NDD score for that mold and the minimum over a label's molds is the
//! span's score for the label. Lower is more constituent-like.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ndd::{ndd, ndd_batch, NddError, Substitution};
use crate::projection::PosProjection;
use crate::provider::DistributionProvider;
use crate::treebank::{EncodedSentence, Sentence, Span, WordPieceTokenizer};

/// Default upper bound on the number of molds in a registry.
pub const DEFAULT_MOLD_CAP: usize = 25;

#[derive(Debug, Error)]
pub enum MoldError {
    #[error("no mold for label {0}")]
    NoMoldForLabel(String),
    #[error("mold {index}: {message}")]
    InvalidMold { index: usize, message: String },
    #[error("{count} molds exceed the cap of {cap}")]
    TooManyMolds { count: usize, cap: usize },
    #[error("span ({start}, {end}) is out of range for a {len}-word sentence")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error(transparent)]
    Ndd(#[from] NddError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(W, i, j, l)` plus whether the mold is used for tree labeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mold {
    pub tokens: Vec<String>,
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default)]
    pub utl: bool,
}

impl Mold {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }

    fn validate(&self) -> Result<(), String> {
        let n = self.tokens.len();
        if self.start < 1 || self.start > self.end || self.end > n {
            return Err(format!("span ({}, {}) out of range for {n} words", self.start, self.end));
        }
        if self.end - self.start + 1 == n {
            return Err("span covers the whole sentence".into());
        }
        if self.label.is_empty() {
            return Err("empty label".into());
        }
        Ok(())
    }
}

/// Which molds of a label take part in scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoldSelection {
    #[default]
    All,
    /// Only molds flagged `utl`; a label without flagged molds uses all of its molds.
    UtlFlagged,
}

#[derive(Debug, Clone)]
pub struct RegistryOptions {
    pub cap: usize,
    /// When set, every mold label must be listed and every listed label needs a mold.
    pub labels: Option<Vec<String>>,
}

impl Default for RegistryOptions {
    fn default() -> Self {
        RegistryOptions {
            cap: DEFAULT_MOLD_CAP,
            labels: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EncodedMold {
    pub mold: Mold,
    pub encoded: EncodedSentence,
}

impl EncodedMold {
    /// Subword span of the mold's constituent.
    pub fn subword_span(&self) -> Span {
        self.encoded.alignment.to_subwords(self.mold.span())
    }
}

/// Molds grouped by label, encoded into subwords once at load time.
#[derive(Debug, Clone)]
pub struct MoldRegistry {
    molds: Vec<EncodedMold>,
    by_label: BTreeMap<String, Vec<usize>>,
    labels: Vec<String>,
}

impl MoldRegistry {
    pub fn new(
        molds: Vec<Mold>,
        tokenizer: &WordPieceTokenizer,
        options: &RegistryOptions,
    ) -> Result<Self, MoldError> {
        if molds.len() > options.cap {
            return Err(MoldError::TooManyMolds {
                count: molds.len(),
                cap: options.cap,
            });
        }
        let mut by_label: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut encoded = Vec::with_capacity(molds.len());
        for (index, mold) in molds.into_iter().enumerate() {
            mold.validate()
                .map_err(|message| MoldError::InvalidMold { index, message })?;
            if let Some(allowed) = &options.labels {
                if !allowed.contains(&mold.label) {
                    return Err(MoldError::InvalidMold {
                        index,
                        message: format!("label {} is not in the configured label set", mold.label),
                    });
                }
            }
            if !labels.contains(&mold.label) {
                labels.push(mold.label.clone());
            }
            by_label.entry(mold.label.clone()).or_default().push(index);
            let enc = tokenizer.encode(&mold.tokens);
            encoded.push(EncodedMold { mold, encoded: enc });
        }
        if let Some(allowed) = &options.labels {
            if let Some(missing) = allowed.iter().find(|l| !by_label.contains_key(*l)) {
                return Err(MoldError::NoMoldForLabel(missing.clone()));
            }
        }
        Ok(MoldRegistry {
            molds: encoded,
            by_label,
            labels,
        })
    }

    /// JSON array of `{"tokens", "start", "end", "label", "utl"}`.
    pub fn parse_molds(json: &str) -> Result<Vec<Mold>, MoldError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(
        path: impl AsRef<Path>,
        tokenizer: &WordPieceTokenizer,
        options: &RegistryOptions,
    ) -> Result<Self, MoldError> {
        let molds = Self::parse_molds(&std::fs::read_to_string(path)?)?;
        Self::new(molds, tokenizer, options)
    }

    /// Labels in order of first appearance.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.molds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.molds.is_empty()
    }

    pub fn molds(&self) -> &[EncodedMold] {
        &self.molds
    }

    pub fn molds_for(
        &self,
        label: &str,
        selection: MoldSelection,
    ) -> Result<Vec<&EncodedMold>, MoldError> {
        let idx = self
            .by_label
            .get(label)
            .ok_or_else(|| MoldError::NoMoldForLabel(label.to_string()))?;
        let all: Vec<&EncodedMold> = idx.iter().map(|&i| &self.molds[i]).collect();
        if selection == MoldSelection::UtlFlagged {
            let flagged: Vec<&EncodedMold> = all.iter().copied().filter(|m| m.mold.utl).collect();
            if !flagged.is_empty() {
                return Ok(flagged);
            }
        }
        Ok(all)
    }
}

/// Anything that can score spans of a sentence for a label; lower is better.
pub trait SpanScorer: Sync {
    fn score_spans(
        &self,
        sentence: &Sentence,
        label: &str,
        spans: &[Span],
    ) -> Result<Vec<f64>, MoldError>;
}

/// DP-NDD scoring against a mold registry.
#[derive(Clone, Copy)]
pub struct DpNddScorer<'a> {
    pub registry: &'a MoldRegistry,
    pub provider: &'a DistributionProvider,
    pub projection: Option<&'a PosProjection>,
    pub tokenizer: &'a WordPieceTokenizer,
    pub selection: MoldSelection,
}

impl<'a> DpNddScorer<'a> {
    pub fn encode(&self, sentence: &Sentence) -> EncodedSentence {
        self.tokenizer.encode(&sentence.words)
    }

    fn check(sentence: &EncodedSentence, span: Span) -> Result<(), MoldError> {
        let len = sentence.alignment.words();
        if span.start < 1 || span.start > span.end || span.end > len {
            return Err(MoldError::SpanOutOfRange {
                start: span.start,
                end: span.end,
                len,
            });
        }
        Ok(())
    }

    fn to_mold_sub(mold: &EncodedMold, sentence: &EncodedSentence, span: Span) -> Result<Substitution, MoldError> {
        let slot = mold.subword_span();
        Ok(Substitution::new(
            mold.encoded.ids.clone(),
            slot.start,
            slot.end,
            sentence.span_ids(span).to_vec(),
        )?)
    }

    fn from_mold_sub(mold: &EncodedMold, sentence: &EncodedSentence, span: Span) -> Result<Substitution, MoldError> {
        let slot = sentence.alignment.to_subwords(span);
        Ok(Substitution::new(
            sentence.ids.clone(),
            slot.start,
            slot.end,
            mold.encoded.span_ids(mold.mold.span()).to_vec(),
        )?)
    }

    /// POS-NDD of pasting `sentence[span]` into the mold's slot.
    pub fn to_mold_score(
        &self,
        mold: &EncodedMold,
        sentence: &EncodedSentence,
        span: Span,
    ) -> Result<f64, MoldError> {
        Self::check(sentence, span)?;
        Ok(ndd(&Self::to_mold_sub(mold, sentence, span)?, self.provider, self.projection)?)
    }

    /// POS-NDD of pasting the mold's constituent into `sentence[span]`.
    pub fn from_mold_score(
        &self,
        mold: &EncodedMold,
        sentence: &EncodedSentence,
        span: Span,
    ) -> Result<f64, MoldError> {
        Self::check(sentence, span)?;
        Ok(ndd(&Self::from_mold_sub(mold, sentence, span)?, self.provider, self.projection)?)
    }

    /// `min over molds of (To-Mold + From-Mold)`.
    pub fn dp_ndd(&self, label: &str, sentence: &EncodedSentence, span: Span) -> Result<f64, MoldError> {
        Ok(self.dp_ndd_many(label, sentence, &[span], false)?[0])
    }

    /// Scores several spans in one provider batch. With `to_mold_only_for_whole`
    /// a span covering the whole sentence (no From-Mold overlap) is scored by
    /// its To-Mold term alone instead of failing.
    pub fn dp_ndd_many(
        &self,
        label: &str,
        sentence: &EncodedSentence,
        spans: &[Span],
        to_mold_only_for_whole: bool,
    ) -> Result<Vec<f64>, MoldError> {
        let molds = self.registry.molds_for(label, self.selection)?;
        let n = sentence.alignment.words();
        let mut subs = Vec::new();
        let mut shape = Vec::with_capacity(spans.len());
        for &span in spans {
            Self::check(sentence, span)?;
            let whole = span.start == 1 && span.end == n;
            let dual = !(whole && to_mold_only_for_whole);
            for mold in &molds {
                subs.push(Self::to_mold_sub(mold, sentence, span)?);
                if dual {
                    subs.push(Self::from_mold_sub(mold, sentence, span)?);
                }
            }
            shape.push(dual);
        }
        let values = ndd_batch(&subs, self.provider, self.projection)?;
        let mut it = values.into_iter();
        let mut out = Vec::with_capacity(spans.len());
        for dual in shape {
            let mut best = f64::INFINITY;
            for _ in 0..molds.len() {
                let mut s = it.next().expect("to-mold value");
                if dual {
                    s += it.next().expect("from-mold value");
                }
                best = best.min(s);
            }
            out.push(best);
        }
        Ok(out)
    }
}

impl SpanScorer for DpNddScorer<'_> {
    fn score_spans(
        &self,
        sentence: &Sentence,
        label: &str,
        spans: &[Span],
    ) -> Result<Vec<f64>, MoldError> {
        if spans.is_empty() {
            return Ok(Vec::new());
        }
        let encoded = self.encode(sentence);
        self.dp_ndd_many(label, &encoded, spans, true)
    }
}
