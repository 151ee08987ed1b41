use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::treebank::LabeledTree;

/// Rows are gold labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn get(&self, gold: &str, predicted: &str) -> u64 {
        match (self.index(gold), self.index(predicted)) {
            (Some(g), Some(p)) => self.counts[g][p],
            _ => 0,
        }
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row_sum(&self, gold: &str) -> u64 {
        self.index(gold).map_or(0, |g| self.counts[g].iter().sum())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("gold\\predicted,{}\n", self.labels.join(","));
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(|l| l.len())
            .chain(self.counts.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        let mut out = format!("{:<width$}", "gold");
        for l in &self.labels {
            let _ = write!(out, "  {l:>width$}");
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(out, "{label:<width$}");
            for c in row {
                let _ = write!(out, "  {c:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Cross-tabulates labels over identical bracketings. Spans are paired in
/// tree order, so unary chains pair position by position. Labels missing from
/// `labels` are appended in order of first appearance.
pub fn confusion_matrix(
    predicted: &[LabeledTree],
    gold: &[LabeledTree],
    labels: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::SentenceCountMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let mut all: Vec<String> = labels.to_vec();
    let mut pairs = Vec::new();
    for (index, (p, g)) in predicted.iter().zip(gold).enumerate() {
        let same = p.spans.len() == g.spans.len()
            && p.spans.iter().zip(&g.spans).all(|(a, b)| a.span() == b.span());
        if !same || p.len() != g.len() {
            return Err(EvalError::SpanSetMismatch { index });
        }
        for (a, b) in p.spans.iter().zip(&g.spans) {
            for l in [&b.label, &a.label] {
                if !all.contains(l) {
                    all.push(l.clone());
                }
            }
            pairs.push((&b.label, &a.label));
        }
    }
    let mut m = ConfusionMatrix {
        counts: vec![vec![0; all.len()]; all.len()],
        labels: all,
    };
    for (g, p) in pairs {
        let (gi, pi) = (m.index(g).unwrap(), m.index(p).unwrap());
        m.counts[gi][pi] += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{LabeledSpan, Sentence};
    use proptest::prelude::*;

    fn tree(n: usize, spans: &[(usize, usize, &str)]) -> LabeledTree {
        let words: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        LabeledTree::new(
            Sentence::new(words, vec!["X".into(); n]).unwrap(),
            spans.iter().map(|&(s, e, l)| LabeledSpan::new(s, e, l)).collect(),
        )
        .unwrap()
    }

    fn labels() -> Vec<String> {
        ["NP", "VP", "ADJP"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_is_diagonal() {
        let g = vec![tree(5, &[(1, 2, "NP"), (3, 5, "VP"), (4, 5, "NP")])];
        let m = confusion_matrix(&g, &g, &labels()).unwrap();
        assert_eq!(m.counts, vec![vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 0]]);
    }

    #[test]
    fn single_confusion() {
        let g = vec![tree(5, &[(1, 2, "NP"), (3, 5, "VP")])];
        let p = vec![tree(5, &[(1, 2, "ADJP"), (3, 5, "VP")])];
        let m = confusion_matrix(&p, &g, &labels()).unwrap();
        assert_eq!(m.get("NP", "ADJP"), 1);
        assert_eq!(m.get("NP", "NP"), 0);
        assert_eq!(m.to_csv().lines().nth(1).unwrap(), "NP,0,0,1");
        assert!(m.to_table().starts_with("gold"));
    }

    #[test]
    fn unknown_labels_appended() {
        let g = vec![tree(4, &[(1, 2, "QP")])];
        let p = vec![tree(4, &[(1, 2, "NP")])];
        let m = confusion_matrix(&p, &g, &labels()).unwrap();
        assert_eq!(m.labels.last().unwrap(), "QP");
        assert_eq!(m.get("QP", "NP"), 1);
    }

    #[test]
    fn span_sets_must_agree() {
        let g = vec![tree(5, &[(1, 2, "NP")])];
        let p = vec![tree(5, &[(1, 3, "NP")])];
        assert!(matches!(
            confusion_matrix(&p, &g, &labels()),
            Err(EvalError::SpanSetMismatch { index: 0 })
        ));
    }

    proptest! {
        #[test]
        fn rows_sum_to_gold_counts(picks in prop::collection::vec((0usize..3, 0usize..3), 1..8)) {
            // a right-branching chain gives one span per pick
            let n = picks.len() + 1;
            let names = ["NP", "VP", "ADJP"];
            let gold_spans: Vec<(usize, usize, &str)> =
                picks.iter().enumerate().map(|(i, (g, _))| (i + 1, n, names[*g])).collect();
            let pred_spans: Vec<(usize, usize, &str)> =
                picks.iter().enumerate().map(|(i, (_, p))| (i + 1, n, names[*p])).collect();
            let m = confusion_matrix(&[tree(n, &pred_spans)], &[tree(n, &gold_spans)], &labels()).unwrap();
            for (gi, name) in names.iter().enumerate() {
                let expected = picks.iter().filter(|(g, _)| *g == gi).count() as u64;
                prop_assert_eq!(m.row_sum(name), expected);
            }
        }
    }
}
