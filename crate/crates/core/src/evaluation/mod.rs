//! Bracket scoring, label confusion and substitution disturbance.

mod confusion;
mod disturbance;
mod f1;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use disturbance::{disturbance_matrix, DisturbanceMatrix, DisturbanceOptions, Metric};
pub use f1::{labeled_f1, unlabeled_f1, Averaging, EvalOptions, F1Report, LabelScore, Prf};

use thiserror::Error;

use crate::ndd::NddError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predicted} predicted sentences but {gold} gold sentences")]
    SentenceCountMismatch { predicted: usize, gold: usize },
    #[error("sentence {index}: predicted has {predicted} words, gold has {gold}")]
    LengthMismatch { index: usize, predicted: usize, gold: usize },
    #[error("sentence {index}: predicted and gold bracketings differ")]
    SpanSetMismatch { index: usize },
    #[error("label {label} has {found} usable span(s); at least 2 are needed")]
    InsufficientSpans { label: String, found: usize },
    #[error("the pos-ndd metric needs a POS projection")]
    MissingProjection,
    #[error(transparent)]
    Ndd(#[from] NddError),
}
