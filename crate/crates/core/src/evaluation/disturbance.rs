use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ndd::{ndd_batch, Substitution};
use crate::projection::PosProjection;
use crate::provider::DistributionProvider;
use crate::treebank::{EncodedSentence, LabeledTree, Span, WordPieceTokenizer};

/// Substitutions sent to the provider per call within one cell.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ndd")]
    Ndd,
    #[default]
    #[serde(rename = "pos-ndd")]
    PosNdd,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ndd" => Ok(Metric::Ndd),
            "pos-ndd" | "posndd" | "pos_ndd" => Ok(Metric::PosNdd),
            other => Err(format!("unknown metric {other:?} (expected ndd or pos-ndd)")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Ndd => "ndd",
            Metric::PosNdd => "pos-ndd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisturbanceOptions {
    pub sample_size: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for DisturbanceOptions {
    fn default() -> Self {
        DisturbanceOptions {
            sample_size: 2000,
            metric: Metric::PosNdd,
            seed: 0,
        }
    }
}

/// `mean[a][b]`: average divergence when a span labeled `b` replaces a span
/// labeled `a` in `a`'s sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceMatrix {
    pub labels: Vec<String>,
    pub metric: Metric,
    pub mean: Vec<Vec<f64>>,
    pub samples: Vec<Vec<usize>>,
}

impl DisturbanceMatrix {
    pub fn get(&self, replaced: &str, substitute: &str) -> Option<f64> {
        let a = self.labels.iter().position(|l| l == replaced)?;
        let b = self.labels.iter().position(|l| l == substitute)?;
        Some(self.mean[a][b])
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("replaced\\substitute,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.mean) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }

    pub fn samples_csv(&self) -> String {
        let mut out = format!("replaced\\substitute,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.samples) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self.labels.iter().map(|l| l.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:<width$}", self.metric.to_string());
        for l in &self.labels {
            let _ = write!(out, "  {l:>width$}");
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.mean) {
            let _ = write!(out, "{label:<width$}");
            for v in row {
                let _ = write!(out, "  {v:>width$.4}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
struct Instance {
    sentence: usize,
    span: Span,
}

fn instances(corpus: &[LabeledTree], label: &str) -> Vec<Instance> {
    let mut out = Vec::new();
    for (sentence, tree) in corpus.iter().enumerate() {
        let n = tree.len();
        let mut seen = Vec::new();
        for sp in tree.spans.iter().filter(|s| s.label == label) {
            let span = sp.span();
            // nothing would be left to compare after replacing the whole sentence
            if span.len() == n || seen.contains(&span) {
                continue;
            }
            seen.push(span);
            out.push(Instance { sentence, span });
        }
    }
    out
}

/// Sampled (replaced, substitute) instance pairs for one cell, without
/// replacement; a diagonal cell never pairs an instance with itself.
fn sample_pairs(na: usize, nb: usize, diagonal: bool, size: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let (total, stride) = if diagonal { (na * (na - 1), na - 1) } else { (na * nb, nb) };
    let amount = size.min(total);
    index::sample(rng, total, amount)
        .into_iter()
        .map(|k| {
            let (i, j) = (k / stride, k % stride);
            if diagonal && j >= i {
                (i, j + 1)
            } else {
                (i, j)
            }
        })
        .collect()
}

/// Samples span pairs for every ordered label pair and averages the
/// divergence caused by substituting one into the other's slot.
///
/// Each cell draws from its own ChaCha stream derived from `seed`, so the
/// result does not depend on thread scheduling.
pub fn disturbance_matrix(
    corpus: &[LabeledTree],
    labels: &[String],
    opts: &DisturbanceOptions,
    provider: &DistributionProvider,
    tokenizer: &WordPieceTokenizer,
    projection: Option<&PosProjection>,
) -> Result<DisturbanceMatrix, EvalError> {
    let projection = match opts.metric {
        Metric::Ndd => None,
        Metric::PosNdd => Some(projection.ok_or(EvalError::MissingProjection)?),
    };
    let by_label: Vec<Vec<Instance>> = labels.iter().map(|l| instances(corpus, l)).collect();
    for (label, inst) in labels.iter().zip(&by_label) {
        if inst.len() < 2 {
            return Err(EvalError::InsufficientSpans {
                label: label.clone(),
                found: inst.len(),
            });
        }
    }
    let encoded: Vec<EncodedSentence> = corpus.iter().map(|t| tokenizer.encode(&t.sentence.words)).collect();

    let k = labels.len();
    let cells: Vec<(f64, usize)> = (0..k * k)
        .into_par_iter()
        .map(|cell| {
            let (a, b) = (cell / k, cell % k);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(cell as u64);
            let pairs = sample_pairs(by_label[a].len(), by_label[b].len(), a == b, opts.sample_size, &mut rng);
            let subs = pairs
                .iter()
                .map(|&(i, j)| {
                    let host = by_label[a][i];
                    let donor = by_label[b][j];
                    let enc = &encoded[host.sentence];
                    let slot = enc.alignment.to_subwords(host.span);
                    let text = encoded[donor.sentence].span_ids(donor.span).to_vec();
                    Substitution::new(enc.ids.clone(), slot.start, slot.end, text)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let mut total = 0.0;
            for chunk in subs.chunks(CHUNK) {
                total += ndd_batch(chunk, provider, projection)?.iter().sum::<f64>();
            }
            let mean = if subs.is_empty() { 0.0 } else { total / subs.len() as f64 };
            Ok((mean, subs.len()))
        })
        .collect::<Result<_, EvalError>>()?;

    Ok(DisturbanceMatrix {
        labels: labels.to_vec(),
        metric: opts.metric,
        mean: cells.chunks(k).map(|r| r.iter().map(|c| c.0).collect()).collect(),
        samples: cells.chunks(k).map(|r| r.iter().map(|c| c.1).collect()).collect(),
    })
}
