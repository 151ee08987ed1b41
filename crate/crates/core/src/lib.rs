//! Masked-LM span divergence for unsupervised labeled constituency parsing.
//!
//! A [`provider::DistributionProvider`] answers masked-token queries (through
//! an HTTP sidecar, a deterministic mock, or a replay cache). [`ndd`] turns
//! those distributions into span-substitution divergences, [`mold`] compares
//! candidate spans against labeled exemplars, and [`lsg`] / [`utl`] build
//! labeled trees from the scores. [`evaluation`] scores the output.

pub mod evaluation;
pub mod lsg;
pub mod mold;
pub mod ndd;
pub mod presets;
pub mod projection;
pub mod provider;
pub mod treebank;
pub mod utl;

pub use evaluation::{EvalError, EvalOptions, F1Report, Metric};
pub use lsg::{LsgError, LsgParser, Profile, ScoredSpan};
pub use mold::{DpNddScorer, Mold, MoldError, MoldRegistry, MoldSelection, SpanScorer};
pub use ndd::{kl_divergence, ndd, ndd_batch, NddError, Substitution};
pub use projection::{Lexicon, PosProjection, ProjectionError};
pub use provider::{DistributionProvider, MaskQuery, ProviderError, TokenDistribution, TokenId};
pub use treebank::{LabeledSpan, LabeledTree, Sentence, Span, TreebankError};
pub use utl::{PosPrior, UtlError, UtlLabeler};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Ndd(#[from] NddError),
    #[error(transparent)]
    Mold(#[from] MoldError),
    #[error(transparent)]
    Lsg(#[from] LsgError),
    #[error(transparent)]
    Utl(#[from] UtlError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
