//! Labeled span generation.
//!
//! For each label in turn: pick candidate spans by POS context, score them
//! with a [`SpanScorer`], drop candidates crossing spans accepted for earlier
//! labels, then threshold and resolve same-label overlaps. The union of all
//! iterations is a non-crossing labeled bracketing.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mold::{MoldError, SpanScorer};
use crate::treebank::{LabeledSpan, LabeledTree, Sentence, Span};

pub const SENTENCE_START: &str = "SOS";
pub const SENTENCE_END: &str = "EOS";

#[derive(Debug, Error)]
pub enum LsgError {
    #[error("no POS constraint for label {0}")]
    MissingConstraint(String),
    #[error("no threshold configuration for label {0}")]
    MissingConfig(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scoring(#[from] MoldError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Allowed POS tags at the four boundary positions of a candidate; `None`
/// means unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosConstraint {
    pub label: String,
    pub start: Option<BTreeSet<String>>,
    pub end: Option<BTreeSet<String>>,
    pub before: Option<BTreeSet<String>>,
    pub after: Option<BTreeSet<String>>,
    #[serde(default)]
    pub max_len: Option<usize>,
}

impl PosConstraint {
    /// Everything allowed.
    pub fn any(label: impl Into<String>) -> Self {
        PosConstraint {
            label: label.into(),
            start: None,
            end: None,
            before: None,
            after: None,
            max_len: None,
        }
    }

    fn validate(&self) -> Result<(), LsgError> {
        for set in [&self.start, &self.end, &self.before, &self.after].into_iter().flatten() {
            if set.is_empty() {
                return Err(LsgError::Config(format!("{}: empty POS set", self.label)));
            }
        }
        if self.max_len == Some(0) {
            return Err(LsgError::Config(format!("{}: max_len must be positive", self.label)));
        }
        Ok(())
    }
}

fn allows(set: &Option<BTreeSet<String>>, tag: &str) -> bool {
    set.as_ref().is_none_or(|s| s.contains(tag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Tight,
    Loose,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tight" => Ok(Profile::Tight),
            "loose" => Ok(Profile::Loose),
            other => Err(format!("unknown profile {other:?} (expected tight or loose)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConfig {
    pub label: String,
    pub threshold: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub profile: Profile,
    pub labels: Vec<LabelConfig>,
}

/// Which span of a crossing same-label pair survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapKeep {
    /// Keep the lower (better) DP-NDD score.
    #[default]
    Lower,
    Higher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub score: f64,
}

impl ScoredSpan {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// All `(s, t)` whose boundary POS tags satisfy the constraint. The span
/// covering the whole sentence is never a candidate.
pub fn select_candidates(sentence: &Sentence, constraint: &PosConstraint) -> Vec<Span> {
    let n = sentence.len();
    let tags = &sentence.pos_tags;
    let mut out = Vec::new();
    for s in 1..=n {
        if !allows(&constraint.start, &tags[s - 1]) {
            continue;
        }
        let before = if s == 1 { SENTENCE_START } else { tags[s - 2].as_str() };
        if !allows(&constraint.before, before) {
            continue;
        }
        for t in s..=n {
            if constraint.max_len.is_some_and(|m| t - s + 1 > m) {
                break;
            }
            if s == 1 && t == n {
                continue;
            }
            let after = if t == n { SENTENCE_END } else { tags[t].as_str() };
            if allows(&constraint.end, &tags[t - 1]) && allows(&constraint.after, after) {
                out.push(Span::new(s, t));
            }
        }
    }
    out
}

pub fn score_candidates<S: SpanScorer + ?Sized>(
    sentence: &Sentence,
    candidates: &[Span],
    label: &str,
    scorer: &S,
) -> Result<Vec<ScoredSpan>, LsgError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score_spans(sentence, label, candidates)?;
    Ok(candidates
        .iter()
        .zip(scores)
        .map(|(sp, score)| ScoredSpan {
            start: sp.start,
            end: sp.end,
            label: label.to_string(),
            score,
        })
        .collect())
}

/// Drops spans crossing any already accepted span. Nesting and disjointness are fine.
pub fn remove_conflicts(spans: Vec<ScoredSpan>, accepted: &[ScoredSpan]) -> Vec<ScoredSpan> {
    spans
        .into_iter()
        .filter(|sp| !accepted.iter().any(|a| a.span().crosses(&sp.span())))
        .collect()
}

/// Thresholding plus same-label overlap resolution.
///
/// Spans at or above the threshold go first. The rest are visited best
/// first (ascending score, ties by `(s, t)`; descending with
/// [`OverlapKeep::Higher`]) and a span survives unless it duplicates or
/// crosses a survivor, or nests with a survivor whose score differs by at
/// least `tolerance`. Output is in pre-order.
pub fn filter_spans(
    spans: Vec<ScoredSpan>,
    config: &LabelConfig,
    keep: OverlapKeep,
) -> Vec<ScoredSpan> {
    let mut pool: Vec<ScoredSpan> = spans
        .into_iter()
        .filter(|sp| sp.score < config.threshold)
        .collect();
    pool.sort_by(|a, b| {
        let by_score = match keep {
            OverlapKeep::Lower => a.score.total_cmp(&b.score),
            OverlapKeep::Higher => b.score.total_cmp(&a.score),
        };
        by_score.then((a.start, a.end).cmp(&(b.start, b.end)))
    });
    let mut kept: Vec<ScoredSpan> = Vec::new();
    for sp in pool {
        let span = sp.span();
        let blocked = kept.iter().any(|k| {
            let other = k.span();
            if other == span || other.crosses(&span) {
                true
            } else if other.contains(&span) || span.contains(&other) {
                (k.score - sp.score).abs() >= config.tolerance
            } else {
                false
            }
        });
        if !blocked {
            kept.push(sp);
        }
    }
    kept.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    kept
}

/// Per-label constraints, thresholds and processing order.
#[derive(Debug, Clone)]
pub struct LsgParser {
    label_order: Vec<String>,
    constraints: HashMap<String, PosConstraint>,
    configs: HashMap<String, LabelConfig>,
    pub overlap_keep: OverlapKeep,
}

impl LsgParser {
    pub fn new(
        label_order: Vec<String>,
        constraints: Vec<PosConstraint>,
        configs: Vec<LabelConfig>,
    ) -> Result<Self, LsgError> {
        let mut cons = HashMap::new();
        for c in constraints {
            c.validate()?;
            cons.insert(c.label.clone(), c);
        }
        let mut cfgs = HashMap::new();
        for c in configs {
            if !(c.threshold > 0.0) || !(c.tolerance >= 0.0) {
                return Err(LsgError::Config(format!(
                    "{}: threshold must be > 0 and tolerance >= 0",
                    c.label
                )));
            }
            cfgs.insert(c.label.clone(), c);
        }
        for label in &label_order {
            if !cons.contains_key(label) {
                return Err(LsgError::MissingConstraint(label.clone()));
            }
            if !cfgs.contains_key(label) {
                return Err(LsgError::MissingConfig(label.clone()));
            }
        }
        Ok(LsgParser {
            label_order,
            constraints: cons,
            configs: cfgs,
            overlap_keep: OverlapKeep::Lower,
        })
    }

    /// Shipped constraints and thresholds for `profile`, default label order.
    pub fn preset(profile: Profile) -> Self {
        Self::new(
            crate::presets::default_label_order(),
            crate::presets::constraints(),
            crate::presets::label_configs(profile),
        )
        .expect("shipped configuration is consistent")
    }

    pub fn label_order(&self) -> &[String] {
        &self.label_order
    }

    /// Runs every label iteration and returns the accepted spans in the
    /// order they were accepted.
    pub fn parse_sentence<S: SpanScorer + ?Sized>(
        &self,
        sentence: &Sentence,
        scorer: &S,
    ) -> Result<Vec<ScoredSpan>, LsgError> {
        let mut accepted: Vec<ScoredSpan> = Vec::new();
        for label in &self.label_order {
            let candidates = select_candidates(sentence, &self.constraints[label]);
            // Conflict removal only looks at extents, so doing it before
            // scoring yields the same survivors with fewer model queries.
            let candidates: Vec<Span> = candidates
                .into_iter()
                .filter(|c| !accepted.iter().any(|a| a.span().crosses(c)))
                .collect();
            let scored = score_candidates(sentence, &candidates, label, scorer)?;
            let survivors = filter_spans(scored, &self.configs[label], self.overlap_keep);
            accepted.extend(survivors);
        }
        Ok(accepted)
    }

    pub fn parse_tree<S: SpanScorer + ?Sized>(
        &self,
        sentence: &Sentence,
        scorer: &S,
    ) -> Result<LabeledTree, LsgError> {
        let spans = self.parse_sentence(sentence, scorer)?;
        Ok(to_tree(sentence, &spans))
    }
}

pub fn to_tree(sentence: &Sentence, spans: &[ScoredSpan]) -> LabeledTree {
    LabeledTree::new(
        sentence.clone(),
        spans
            .iter()
            .map(|s| LabeledSpan::new(s.start, s.end, s.label.clone()))
            .collect(),
    )
    .expect("span generation never produces crossing spans")
}
