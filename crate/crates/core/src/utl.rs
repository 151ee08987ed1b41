//! Unlabeled tree labeling.
//!
//! Every span of a given bracketing gets the label whose molds disturb it
//! least, `argmax_l exp(-S_l)`, optionally weighted by POS priors
//! `alpha_l = p(l | POS(first word)) * p(l | POS(last word))`. The tree
//! structure is never changed.

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::mold::{MoldError, SpanScorer};
use crate::treebank::{LabeledSpan, LabeledTree, Span};

#[derive(Debug, Error)]
pub enum UtlError {
    #[error("cannot estimate priors from an empty treebank")]
    EmptyTreebank,
    #[error("label set is empty")]
    NoLabels,
    #[error(transparent)]
    Scoring(#[from] MoldError),
}

/// `p(label | POS)` for span-initial and span-final words, additively smoothed.
#[derive(Debug, Clone, PartialEq)]
pub struct PosPrior {
    labels: Vec<String>,
    start: HashMap<String, Vec<f64>>,
    end: HashMap<String, Vec<f64>>,
    smoothing: f64,
}

impl PosPrior {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn lookup(&self, table: &HashMap<String, Vec<f64>>, pos: &str, label: usize) -> f64 {
        table
            .get(pos)
            .map(|row| row[label])
            .unwrap_or(1.0 / self.labels.len() as f64)
    }

    /// `p(labels[label] | pos)` at span starts.
    pub fn p_start(&self, pos: &str, label: usize) -> f64 {
        self.lookup(&self.start, pos, label)
    }

    /// `p(labels[label] | pos)` at span ends.
    pub fn p_end(&self, pos: &str, label: usize) -> f64 {
        self.lookup(&self.end, pos, label)
    }

    pub fn alpha(&self, start_pos: &str, end_pos: &str, label: usize) -> f64 {
        self.p_start(start_pos, label) * self.p_end(end_pos, label)
    }

    /// Every POS maps to the uniform distribution.
    pub fn uniform(labels: Vec<String>) -> Self {
        PosPrior {
            labels,
            start: HashMap::new(),
            end: HashMap::new(),
            smoothing: 1.0,
        }
    }
}

/// `p(l | POS) = (count(l, POS) + k) / (count(POS) + k |L|)`, counted over
/// spans whose label is in `labels`; separately for start and end words.
pub fn estimate_priors(
    trees: &[LabeledTree],
    labels: &[String],
    smoothing: f64,
) -> Result<PosPrior, UtlError> {
    if trees.is_empty() {
        return Err(UtlError::EmptyTreebank);
    }
    if labels.is_empty() {
        return Err(UtlError::NoLabels);
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut start_counts: HashMap<String, Vec<f64>> = HashMap::new();
    let mut end_counts: HashMap<String, Vec<f64>> = HashMap::new();
    for tree in trees {
        for sp in &tree.spans {
            let Some(&li) = index.get(sp.label.as_str()) else {
                continue;
            };
            let tags = &tree.sentence.pos_tags;
            start_counts
                .entry(tags[sp.start - 1].clone())
                .or_insert_with(|| vec![0.0; labels.len()])[li] += 1.0;
            end_counts
                .entry(tags[sp.end - 1].clone())
                .or_insert_with(|| vec![0.0; labels.len()])[li] += 1.0;
        }
    }
    let normalize = |counts: HashMap<String, Vec<f64>>| -> HashMap<String, Vec<f64>> {
        counts
            .into_iter()
            .map(|(pos, row)| {
                let total: f64 = row.iter().sum();
                let denom = total + smoothing * row.len() as f64;
                (pos, row.iter().map(|c| (c + smoothing) / denom).collect())
            })
            .collect()
    };
    Ok(PosPrior {
        labels: labels.to_vec(),
        start: normalize(start_counts),
        end: normalize(end_counts),
        smoothing,
    })
}

/// Index of the label maximizing `alpha * exp(-score)`; earliest wins ties.
pub fn choose_label(scores: &[f64], alphas: Option<&[f64]>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        let log_alpha = alphas.map_or(0.0, |a| a[i].ln());
        let value = log_alpha - s;
        if value > best_value || (i == 0 && value == best_value) {
            best = i;
            best_value = value;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct UtlLabeler {
    labels: Vec<String>,
    priors: Option<PosPrior>,
}

impl UtlLabeler {
    pub fn new(labels: Vec<String>, priors: Option<PosPrior>) -> Result<Self, UtlError> {
        if labels.is_empty() {
            return Err(UtlError::NoLabels);
        }
        Ok(UtlLabeler { labels, priors })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn alphas(&self, tree: &LabeledTree, span: Span) -> Option<Vec<f64>> {
        let priors = self.priors.as_ref()?;
        let tags = &tree.sentence.pos_tags;
        let (sp, ep) = (&tags[span.start - 1], &tags[span.end - 1]);
        Some(
            self.labels
                .iter()
                .map(|l| {
                    priors
                        .labels()
                        .iter()
                        .position(|x| x == l)
                        .map_or(1.0, |i| priors.alpha(sp, ep, i))
                })
                .collect(),
        )
    }

    /// Label for one span of `tree`'s sentence.
    pub fn label_span<S: SpanScorer + ?Sized>(
        &self,
        tree: &LabeledTree,
        span: Span,
        scorer: &S,
    ) -> Result<String, UtlError> {
        let scores = self
            .labels
            .iter()
            .map(|l| Ok(scorer.score_spans(&tree.sentence, l, &[span])?[0]))
            .collect::<Result<Vec<f64>, MoldError>>()?;
        let alphas = self.alphas(tree, span);
        Ok(self.labels[choose_label(&scores, alphas.as_deref())].clone())
    }

    /// Relabels every span of `tree`; extents and multiplicities are untouched.
    pub fn label_tree<S: SpanScorer + ?Sized>(
        &self,
        tree: &LabeledTree,
        scorer: &S,
    ) -> Result<LabeledTree, UtlError> {
        let extents = tree.distinct_spans();
        if extents.is_empty() {
            return Ok(tree.clone());
        }
        // scores[label][extent]
        let scores: Vec<Vec<f64>> = self
            .labels
            .iter()
            .map(|l| scorer.score_spans(&tree.sentence, l, &extents))
            .collect::<Result<_, _>>()?;
        let mut chosen: HashMap<Span, String> = HashMap::new();
        for (k, &extent) in extents.iter().enumerate() {
            let column: Vec<f64> = scores.iter().map(|row| row[k]).collect();
            let alphas = self.alphas(tree, extent);
            chosen.insert(extent, self.labels[choose_label(&column, alphas.as_deref())].clone());
        }
        let spans = tree
            .spans
            .iter()
            .map(|sp| LabeledSpan::new(sp.start, sp.end, chosen[&sp.span()].clone()))
            .collect();
        Ok(LabeledTree {
            sentence: tree.sentence.clone(),
            spans,
        })
    }

    /// Labels trees in parallel; output order follows input order.
    pub fn label_treebank<S: SpanScorer + ?Sized>(
        &self,
        trees: &[LabeledTree],
        scorer: &S,
    ) -> Result<Vec<LabeledTree>, UtlError> {
        trees.par_iter().map(|t| self.label_tree(t, scorer)).collect()
    }
}
