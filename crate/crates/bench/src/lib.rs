//! Fixtures shared by the criterion benchmarks under `benches/`.

use dpndd::projection::Lexicon;
use dpndd::treebank::{Sentence, Vocabulary};

const WORDS: &[(&str, &str)] = &[
    ("the", "DT"),
    ("a", "DT"),
    ("old", "JJ"),
    ("quick", "JJ"),
    ("market", "NN"),
    ("company", "NN"),
    ("shares", "NNS"),
    ("investors", "NNS"),
    ("rose", "VBD"),
    ("said", "VBD"),
    ("in", "IN"),
    ("of", "IN"),
    ("sharply", "RB"),
    ("very", "RB"),
];

/// A deterministic tagged sentence of `n` words cycling through a small
/// lexicon with a stride that mixes the tags.
pub fn sentence(n: usize) -> Sentence {
    let pairs: Vec<(&str, &str)> = (0..n).map(|i| WORDS[(i * 5 + i / 3) % WORDS.len()]).collect();
    Sentence::from_tagged(&pairs)
}

pub fn lexicon() -> Lexicon {
    let mut lex = Lexicon::new();
    for (w, t) in WORDS {
        lex.insert(*w, *t);
    }
    lex
}

/// The bench words padded with filler entries up to `size`.
pub fn vocabulary(size: usize) -> Vocabulary {
    let mut words: Vec<String> = WORDS.iter().map(|(w, _)| w.to_string()).collect();
    words.extend((words.len()..size).map(|i| format!("w{i}")));
    Vocabulary::from_words(words.iter())
}

/// A strictly positive pseudo-random distribution.
pub fn distribution(size: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut v: Vec<f64> = (0..size)
        .map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64).powi(4) + 1e-9
        })
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p /= total);
    v
}
