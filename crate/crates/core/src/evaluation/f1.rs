use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::treebank::{LabeledTree, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool span counts over the whole corpus.
    #[default]
    Corpus,
    /// Average per-sentence scores (sentences with no gold spans are skipped).
    Sentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Count single-word and whole-sentence spans.
    pub keep_trivial_spans: bool,
    /// Treat repeated spans within a sentence as one.
    pub collapse_duplicates: bool,
    pub averaging: Averaging,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            keep_trivial_spans: false,
            collapse_duplicates: true,
            averaging: Averaging::Corpus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(matched: usize, predicted: usize, gold: usize) -> Self {
        let precision = ratio(matched, predicted);
        let recall = ratio(matched, gold);
        Prf {
            precision,
            recall,
            f1: harmonic(precision, recall),
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Labeled scores for one label, plus how many of its gold spans were
/// bracketed at all regardless of label.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub unlabeled_recall: f64,
}

/// Scores lie in `[0, 1]`; renderers multiply by 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub labeled: bool,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub sentences: usize,
    pub per_label: BTreeMap<String, LabelScore>,
}

impl F1Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let kind = if self.labeled { "labeled" } else { "unlabeled" };
        let _ = writeln!(
            out,
            "{kind} P {:6.2}  R {:6.2}  F1 {:6.2}  (matched {} / predicted {} / gold {}, {} sentences)",
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0,
            self.matched,
            self.predicted,
            self.gold,
            self.sentences
        );
        if self.per_label.is_empty() {
            return out;
        }
        let width = self.per_label.keys().map(|l| l.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>6}  {:>6}",
            "label", "P", "R", "F1", "UR", "pred", "gold"
        );
        for (label, s) in &self.per_label {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}  {:>6}  {:>6}",
                label,
                s.precision * 100.0,
                s.recall * 100.0,
                s.f1 * 100.0,
                s.unlabeled_recall * 100.0,
                s.predicted,
                s.gold
            );
        }
        out
    }

    pub fn per_label_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,unlabeled_recall,matched,predicted,gold\n");
        for (label, s) in &self.per_label {
            let _ = writeln!(
                out,
                "{label},{:.4},{:.4},{:.4},{:.4},{},{},{}",
                s.precision * 100.0,
                s.recall * 100.0,
                s.f1 * 100.0,
                s.unlabeled_recall * 100.0,
                s.matched,
                s.predicted,
                s.gold
            );
        }
        out
    }
}

fn is_trivial(span: Span, n: usize) -> bool {
    span.len() == 1 || (span.start == 1 && span.end == n)
}

fn items<T: Eq + Hash + Clone>(raw: impl Iterator<Item = T>, collapse: bool) -> Vec<T> {
    if !collapse {
        return raw.collect();
    }
    let mut seen = HashSet::new();
    raw.filter(|x| seen.insert(x.clone())).collect()
}

fn multiset_overlap<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for x in b {
        *counts.entry(x).or_default() += 1;
    }
    let mut hits = 0;
    for x in a {
        if let Some(c) = counts.get_mut(x) {
            if *c > 0 {
                *c -= 1;
                hits += 1;
            }
        }
    }
    hits
}

type Triple = (usize, usize, String);

fn scored_triples(tree: &LabeledTree, opts: &EvalOptions) -> Vec<Triple> {
    let n = tree.len();
    items(
        tree.spans
            .iter()
            .filter(|s| opts.keep_trivial_spans || !is_trivial(s.span(), n))
            .map(|s| (s.start, s.end, s.label.clone())),
        opts.collapse_duplicates,
    )
}

fn check_alignment(predicted: &[LabeledTree], gold: &[LabeledTree]) -> Result<(), EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::SentenceCountMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    for (index, (p, g)) in predicted.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(EvalError::LengthMismatch {
                index,
                predicted: p.len(),
                gold: g.len(),
            });
        }
    }
    Ok(())
}

#[derive(Default)]
struct LabelCounts {
    matched: usize,
    predicted: usize,
    gold: usize,
    bracketed: usize,
}

fn evaluate(
    predicted: &[LabeledTree],
    gold: &[LabeledTree],
    opts: &EvalOptions,
    labeled: bool,
) -> Result<F1Report, EvalError> {
    check_alignment(predicted, gold)?;
    let (mut matched, mut n_pred, mut n_gold) = (0, 0, 0);
    let mut sentence_scores = Vec::new();
    let mut per_label: BTreeMap<String, LabelCounts> = BTreeMap::new();

    for (p, g) in predicted.iter().zip(gold) {
        let pt = scored_triples(p, opts);
        let gt = scored_triples(g, opts);
        let (m, np, ng) = if labeled {
            (multiset_overlap(&pt, &gt), pt.len(), gt.len())
        } else {
            let extents = |t: &[Triple]| {
                items(t.iter().map(|(s, e, _)| (*s, *e)), opts.collapse_duplicates)
            };
            let (pe, ge) = (extents(&pt), extents(&gt));
            (multiset_overlap(&pe, &ge), pe.len(), ge.len())
        };
        matched += m;
        n_pred += np;
        n_gold += ng;
        if ng > 0 {
            sentence_scores.push(Prf::from_counts(m, np, ng));
        }

        let predicted_extents: HashSet<(usize, usize)> = pt.iter().map(|(s, e, _)| (*s, *e)).collect();
        let mut labels: Vec<&String> = pt.iter().chain(&gt).map(|t| &t.2).collect();
        labels.sort();
        labels.dedup();
        for label in labels {
            let pl: Vec<&Triple> = pt.iter().filter(|t| &t.2 == label).collect();
            let gl: Vec<&Triple> = gt.iter().filter(|t| &t.2 == label).collect();
            let c = per_label.entry(label.clone()).or_default();
            c.matched += multiset_overlap(&pl, &gl);
            c.predicted += pl.len();
            c.gold += gl.len();
            c.bracketed += gl.iter().filter(|t| predicted_extents.contains(&(t.0, t.1))).count();
        }
    }

    let overall = match opts.averaging {
        Averaging::Corpus => Prf::from_counts(matched, n_pred, n_gold),
        Averaging::Sentence => {
            let k = sentence_scores.len().max(1) as f64;
            Prf {
                precision: sentence_scores.iter().map(|s| s.precision).sum::<f64>() / k,
                recall: sentence_scores.iter().map(|s| s.recall).sum::<f64>() / k,
                f1: sentence_scores.iter().map(|s| s.f1).sum::<f64>() / k,
            }
        }
    };

    Ok(F1Report {
        labeled,
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        matched,
        predicted: n_pred,
        gold: n_gold,
        sentences: gold.len(),
        per_label: per_label
            .into_iter()
            .map(|(label, c)| {
                let prf = Prf::from_counts(c.matched, c.predicted, c.gold);
                let score = LabelScore {
                    precision: prf.precision,
                    recall: prf.recall,
                    f1: prf.f1,
                    matched: c.matched,
                    predicted: c.predicted,
                    gold: c.gold,
                    unlabeled_recall: ratio(c.bracketed, c.gold),
                };
                (label, score)
            })
            .collect(),
    })
}

/// Bracket F1 on `(start, end)`, labels ignored. `per_label` still reports
/// labeled scores per label.
pub fn unlabeled_f1(
    predicted: &[LabeledTree],
    gold: &[LabeledTree],
    opts: &EvalOptions,
) -> Result<F1Report, EvalError> {
    evaluate(predicted, gold, opts, false)
}

/// Bracket F1 on `(start, end, label)` with multiset matching, so a span
/// carrying two gold labels counts once per label.
pub fn labeled_f1(
    predicted: &[LabeledTree],
    gold: &[LabeledTree],
    opts: &EvalOptions,
) -> Result<F1Report, EvalError> {
    evaluate(predicted, gold, opts, true)
}
