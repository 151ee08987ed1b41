use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{DistributionBackend, MaskQuery, ProviderError, TokenDistribution};

/// Deterministic stand-in for the masked language model.
///
/// Each distribution is a softmax over pseudo-random logits seeded by a
/// digest of the masked context. Identical contexts give identical vectors,
/// so identity substitutions score exactly zero. With a context window the
/// distribution only sees the `window` tokens on each side of the mask, which
/// makes edits far from a position leave it untouched.
#[derive(Debug, Clone)]
pub struct MockBackend {
    vocab_size: usize,
    window: Option<usize>,
    spread: f64,
    uniform: bool,
    id: String,
}

impl MockBackend {
    pub fn new(vocab_size: usize) -> Self {
        Self::build(vocab_size, None, false)
    }

    pub fn with_window(vocab_size: usize, window: usize) -> Self {
        Self::build(vocab_size, Some(window), false)
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self::build(vocab_size, None, true)
    }

    fn build(vocab_size: usize, window: Option<usize>, uniform: bool) -> Self {
        assert!(vocab_size > 0, "vocabulary must be non-empty");
        let id = match (uniform, window) {
            (true, _) => format!("mock-uniform-c{vocab_size}"),
            (false, None) => format!("mock-v1-c{vocab_size}"),
            (false, Some(w)) => format!("mock-v1-c{vocab_size}-w{w}"),
        };
        MockBackend {
            vocab_size,
            window,
            spread: 3.0,
            uniform,
            id,
        }
    }

    /// The distribution this backend returns for `query`.
    pub fn distribution_for(&self, query: &MaskQuery) -> TokenDistribution {
        if self.uniform {
            return TokenDistribution::uniform(self.vocab_size);
        }
        let idx = query.masked_index;
        let (left, right) = match self.window {
            Some(w) => (
                &query.tokens[idx.saturating_sub(w)..idx],
                &query.tokens[idx + 1..(idx + 1 + w).min(query.tokens.len())],
            ),
            None => (&query.tokens[..idx], &query.tokens[idx + 1..]),
        };
        let mut hasher = Sha256::new();
        hasher.update(self.id.as_bytes());
        hasher.update((left.len() as u32).to_le_bytes());
        for t in left {
            hasher.update(t.to_le_bytes());
        }
        hasher.update((right.len() as u32).to_le_bytes());
        for t in right {
            hasher.update(t.to_le_bytes());
        }
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let logits: Vec<f64> = (0..self.vocab_size)
            .map(|_| rng.gen_range(-self.spread..self.spread))
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs = exps.iter().map(|e| (e / total) as f32).collect();
        TokenDistribution::new(probs).expect("softmax output is a distribution")
    }
}

impl DistributionBackend for MockBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn fetch(&self, queries: &[MaskQuery]) -> Result<Vec<TokenDistribution>, ProviderError> {
        Ok(queries.iter().map(|q| self.distribution_for(q)).collect())
    }
}
