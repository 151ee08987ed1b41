//! Masked-LM token distributions.
//!
//! A [`DistributionProvider`] answers [`MaskQuery`]s from an in-memory /
//! on-disk [`DistributionCache`] first and falls back to a
//! [`DistributionBackend`] (the HTTP sidecar or the deterministic mock) for
//! misses. Every position handled here is a subword position; word-level
//! spans are mapped through [`crate::treebank::SubwordAlignment`] before
//! they reach this layer.

mod cache;
mod http;
mod mock;

pub use cache::{CacheStats, DistributionCache, CACHE_MAGIC};
pub use http::HttpBackend;
pub use mock::MockBackend;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of one vocabulary entry of the masked language model.
pub type TokenId = u32;

/// Tolerance on the total mass of a [`TokenDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid mask query: {0}")]
    InvalidQuery(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("vocabulary mismatch: expected {expected} entries, backend returned {actual}")]
    VocabMismatch { expected: usize, actual: usize },
    #[error("malformed distribution: {0}")]
    MalformedDistribution(String),
    #[error("backend rejected request: {0}")]
    Rejected(String),
    #[error("cache file {path} is corrupt at byte {offset}: {reason}")]
    CorruptCache {
        path: String,
        offset: u64,
        reason: String,
    },
    #[error("cache I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A sentence with exactly one position to mask.
///
/// The backend replaces `tokens[masked_index]` with its mask token; the
/// remaining tokens are left as they are.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskQuery {
    pub tokens: Vec<TokenId>,
    pub masked_index: usize,
}

impl MaskQuery {
    pub fn new(tokens: Vec<TokenId>, masked_index: usize) -> Result<Self, ProviderError> {
        let query = MaskQuery {
            tokens,
            masked_index,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.tokens.is_empty() {
            return Err(ProviderError::InvalidQuery("empty token sequence".into()));
        }
        if self.masked_index >= self.tokens.len() {
            return Err(ProviderError::InvalidQuery(format!(
                "masked_index {} out of range for {} tokens",
                self.masked_index,
                self.tokens.len()
            )));
        }
        Ok(())
    }
}

/// Predicted probability vector over the model vocabulary at a masked
/// position. Stored as `f32`, which is also the transport and on-disk
/// precision, so cached and live values are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f32>,
}

impl TokenDistribution {
    /// Validates non-negativity and total mass.
    pub fn new(probs: Vec<f32>) -> Result<Self, ProviderError> {
        if probs.is_empty() {
            return Err(ProviderError::MalformedDistribution("empty vector".into()));
        }
        if let Some((idx, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ProviderError::MalformedDistribution(format!(
                "entry {idx} is {p}"
            )));
        }
        let mass: f64 = probs.iter().map(|&p| p as f64).sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(ProviderError::MalformedDistribution(format!(
                "total mass {mass} is not 1"
            )));
        }
        Ok(TokenDistribution { probs })
    }

    /// Uniform distribution over `size` entries.
    pub fn uniform(size: usize) -> Self {
        TokenDistribution {
            probs: vec![1.0 / size as f32; size],
        }
    }

    pub fn probs(&self) -> &[f32] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().map(|&p| p as f64).sum()
    }

    /// Widened copy used by the divergence code.
    pub fn to_f64(&self) -> Vec<f64> {
        self.probs.iter().map(|&p| p as f64).collect()
    }
}

/// Something that can run the masked language model.
pub trait DistributionBackend: Send + Sync {
    /// Stable identifier of model + tokenizer revision; part of every cache key.
    fn backend_id(&self) -> &str;

    /// Vocabulary size `c`.
    fn vocab_size(&self) -> usize;

    /// Answers `queries` in order. Queries are already validated.
    fn fetch(&self, queries: &[MaskQuery]) -> Result<Vec<TokenDistribution>, ProviderError>;
}

/// Cache-first access to masked-LM distributions.
pub struct DistributionProvider {
    backend: Option<Box<dyn DistributionBackend>>,
    cache: DistributionCache,
    backend_id: String,
    vocab_size: usize,
    max_batch: usize,
}

impl DistributionProvider {
    /// Provider with a live backend and a fresh in-memory cache.
    pub fn from_backend(backend: Box<dyn DistributionBackend>) -> Self {
        let backend_id = backend.backend_id().to_string();
        let vocab_size = backend.vocab_size();
        DistributionProvider {
            backend: Some(backend),
            cache: DistributionCache::in_memory(),
            backend_id,
            vocab_size,
            max_batch: 256,
        }
    }

    /// Provider that only ever answers from `cache`.
    pub fn cache_only(
        cache: DistributionCache,
        backend_id: impl Into<String>,
        vocab_size: usize,
    ) -> Self {
        DistributionProvider {
            backend: None,
            cache,
            backend_id: backend_id.into(),
            vocab_size,
            max_batch: 256,
        }
    }

    /// Replaces the cache (e.g. with a file-backed one).
    pub fn with_cache(mut self, cache: DistributionCache) -> Self {
        self.cache = cache;
        self
    }

    /// Upper bound on queries per backend call.
    pub fn with_max_batch(mut self, max_batch: usize) -> Self {
        self.max_batch = max_batch.max(1);
        self
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn cache(&self) -> &DistributionCache {
        &self.cache
    }

    pub fn get_distribution(&self, query: &MaskQuery) -> Result<TokenDistribution, ProviderError> {
        let mut out = self.get_distributions_batch(std::slice::from_ref(query))?;
        Ok(out.pop().expect("one result per query"))
    }

    /// Answers all queries or none. Order of results matches `queries`.
    pub fn get_distributions_batch(
        &self,
        queries: &[MaskQuery],
    ) -> Result<Vec<TokenDistribution>, ProviderError> {
        for q in queries {
            q.validate()?;
        }
        let keys: Vec<[u8; 32]> = queries
            .iter()
            .map(|q| cache::cache_key(&self.backend_id, q))
            .collect();

        let mut results: Vec<Option<TokenDistribution>> =
            keys.iter().map(|k| self.cache.lookup(k)).collect();

        // Distinct misses, first occurrence wins.
        let mut pending: HashMap<[u8; 32], usize> = HashMap::new();
        let mut missing: Vec<usize> = Vec::new();
        for (idx, slot) in results.iter().enumerate() {
            if slot.is_none() && !pending.contains_key(&keys[idx]) {
                pending.insert(keys[idx], missing.len());
                missing.push(idx);
            }
        }

        if !missing.is_empty() {
            let backend = self.backend.as_ref().ok_or_else(|| {
                ProviderError::BackendUnavailable(format!(
                    "{} queries not in cache and no backend configured",
                    missing.len()
                ))
            })?;
            let mut fetched = Vec::with_capacity(missing.len());
            for chunk in missing.chunks(self.max_batch) {
                let batch: Vec<MaskQuery> = chunk.iter().map(|&i| queries[i].clone()).collect();
                let answers = backend.fetch(&batch)?;
                if answers.len() != batch.len() {
                    return Err(ProviderError::MalformedDistribution(format!(
                        "backend answered {} of {} queries",
                        answers.len(),
                        batch.len()
                    )));
                }
                for d in &answers {
                    if d.len() != self.vocab_size {
                        return Err(ProviderError::VocabMismatch {
                            expected: self.vocab_size,
                            actual: d.len(),
                        });
                    }
                }
                fetched.extend(answers);
            }
            let entries: Vec<([u8; 32], TokenDistribution)> = missing
                .iter()
                .zip(&fetched)
                .map(|(&i, d)| (keys[i], d.clone()))
                .collect();
            self.cache.insert_many(entries)?;
            for (idx, slot) in results.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(fetched[pending[&keys[idx]]].clone());
                }
            }
        }

        Ok(results
            .into_iter()
            .map(|d| d.expect("all slots filled"))
            .collect())
    }
}

impl std::fmt::Debug for DistributionProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistributionProvider")
            .field("backend_id", &self.backend_id)
            .field("vocab_size", &self.vocab_size)
            .field("has_backend", &self.backend.is_some())
            .finish()
    }
}
