//! Neighboring distribution divergence.
//!
//! A substitution replaces positions `i..=j` (1-based) of a sentence `W` with
//! a replacement `V`. Every position outside the replaced range is masked in
//! `W` and, at its shifted location, in the edited sentence `W'`; the masked-LM
//! distributions of each pair are compared with `KL(edited || original)` and
//! the divergences are averaged. With a [`PosProjection`] both distributions
//! are first collapsed into POS classes (POS-NDD).

use thiserror::Error;

use crate::projection::{PosProjection, ProjectionError};
use crate::provider::{DistributionProvider, MaskQuery, ProviderError, TokenDistribution, TokenId};

/// Floor applied to both distributions before the log ratio.
pub const KL_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NddError {
    #[error("invalid substitution range: {0}")]
    InvalidRange(String),
    #[error("the substitution covers the whole sentence, nothing is left to compare")]
    EmptyOverlap,
    #[error("distributions have {0} and {1} entries")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// Replace `original[start..=end]` (1-based, inclusive) with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution<T = TokenId> {
    original: Vec<T>,
    start: usize,
    end: usize,
    replacement: Vec<T>,
}

/// Position pairs `(k in W, k' in W')`, 1-based, for every untouched position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapAlignment {
    pub pairs: Vec<(usize, usize)>,
}

impl OverlapAlignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl<T: Clone> Substitution<T> {
    /// Non-empty replacement required.
    pub fn new(
        original: Vec<T>,
        start: usize,
        end: usize,
        replacement: Vec<T>,
    ) -> Result<Self, NddError> {
        if replacement.is_empty() {
            return Err(NddError::InvalidRange(
                "empty replacement (deletion is not enabled)".into(),
            ));
        }
        Self::allowing_deletion(original, start, end, replacement)
    }

    /// Like [`Substitution::new`] but an empty replacement deletes the range.
    pub fn allowing_deletion(
        original: Vec<T>,
        start: usize,
        end: usize,
        replacement: Vec<T>,
    ) -> Result<Self, NddError> {
        let n = original.len();
        if start < 1 || start > end || end > n {
            return Err(NddError::InvalidRange(format!(
                "({start}, {end}) for a sentence of {n} tokens"
            )));
        }
        Ok(Substitution {
            original,
            start,
            end,
            replacement,
        })
    }

    pub fn original(&self) -> &[T] {
        &self.original
    }

    pub fn replacement(&self) -> &[T] {
        &self.replacement
    }

    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    /// Number of untouched positions, `n - (j - i + 1)`.
    pub fn overlap_len(&self) -> usize {
        self.original.len() - (self.end - self.start + 1)
    }

    /// The edited sentence and the alignment of the untouched positions.
    pub fn apply(&self) -> (Vec<T>, OverlapAlignment) {
        let (i, j, m) = (self.start, self.end, self.replacement.len());
        let mut edited = Vec::with_capacity(self.original.len() - (j - i + 1) + m);
        edited.extend_from_slice(&self.original[..i - 1]);
        edited.extend_from_slice(&self.replacement);
        edited.extend_from_slice(&self.original[j..]);

        let shift = |k: usize| k + m - (j - i + 1);
        let pairs = (1..i)
            .map(|k| (k, k))
            .chain((j + 1..=self.original.len()).map(|k| (k, shift(k))))
            .collect();
        (edited, OverlapAlignment { pairs })
    }
}

/// Free-function form of [`Substitution::apply`].
pub fn apply_substitution<T: Clone>(sub: &Substitution<T>) -> (Vec<T>, OverlapAlignment) {
    sub.apply()
}

fn floored(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|x| x.max(KL_FLOOR)).collect();
    let total: f64 = clipped.iter().sum();
    clipped.into_iter().map(|x| x / total).collect()
}

/// `KL(edited || original)` in nats, both sides floored at [`KL_FLOOR`] and
/// renormalized.
pub fn kl_divergence(edited: &[f64], original: &[f64]) -> Result<f64, NddError> {
    if edited.len() != original.len() {
        return Err(NddError::DimensionMismatch(edited.len(), original.len()));
    }
    let p = floored(edited);
    let q = floored(original);
    Ok(p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum())
}

/// NDD (or POS-NDD when `projection` is given) of one substitution.
pub fn ndd(
    sub: &Substitution,
    provider: &DistributionProvider,
    projection: Option<&PosProjection>,
) -> Result<f64, NddError> {
    Ok(ndd_batch(std::slice::from_ref(sub), provider, projection)?[0])
}

/// Scores many substitutions with a single provider round trip.
pub fn ndd_batch(
    subs: &[Substitution],
    provider: &DistributionProvider,
    projection: Option<&PosProjection>,
) -> Result<Vec<f64>, NddError> {
    let mut queries = Vec::new();
    let mut counts = Vec::with_capacity(subs.len());
    for sub in subs {
        if sub.overlap_len() == 0 {
            return Err(NddError::EmptyOverlap);
        }
        let (edited, alignment) = sub.apply();
        for &(k, k_edited) in &alignment.pairs {
            queries.push(MaskQuery {
                tokens: sub.original.clone(),
                masked_index: k - 1,
            });
            queries.push(MaskQuery {
                tokens: edited.clone(),
                masked_index: k_edited - 1,
            });
        }
        counts.push(alignment.len());
    }

    let dists = provider.get_distributions_batch(&queries)?;
    let view = |d: &TokenDistribution| -> Result<Vec<f64>, NddError> {
        match projection {
            Some(proj) => Ok(proj.project(d)?),
            None => Ok(d.to_f64()),
        }
    };

    let mut out = Vec::with_capacity(subs.len());
    let mut pairs = dists.chunks_exact(2);
    for count in counts {
        let mut total = 0.0;
        for pair in pairs.by_ref().take(count) {
            let original = view(&pair[0])?;
            let edited = view(&pair[1])?;
            total += kl_divergence(&edited, &original)?;
        }
        out.push(total / count as f64);
    }
    Ok(out)
}
