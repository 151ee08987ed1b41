//! Word to subword mapping.

use std::collections::HashMap;
use std::ops::Range;
use std::path::Path;

use super::{Span, TreebankError};
use crate::provider::TokenId;

pub const UNK_TOKEN: &str = "[UNK]";
const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
const CONTINUATION: &str = "##";

/// Model vocabulary in index order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self, TreebankError> {
        if tokens.is_empty() {
            return Err(TreebankError::Vocabulary("empty vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            index.entry(t.clone()).or_insert(i as TokenId);
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Reads a `vocab.txt`: one entry per line, line number = token id.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TreebankError> {
        let text = std::fs::read_to_string(path)?;
        Self::new(text.lines().map(str::to_string).collect())
    }

    /// Word-level vocabulary: the BERT special tokens followed by every
    /// distinct word in first-seen order.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut seen: std::collections::HashSet<String> = tokens.iter().cloned().collect();
        for w in words {
            let w = w.as_ref();
            if seen.insert(w.to_string()) {
                tokens.push(w.to_string());
            }
        }
        Self::new(tokens).expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Continuation pieces (`##x`) and bracketed specials (`[CLS]`, `[unused0]`).
    pub fn is_fragment_or_special(token: &str) -> bool {
        token.starts_with(CONTINUATION) || (token.starts_with('[') && token.ends_with(']') && token.len() > 2)
    }
}

/// Word index (0-based) to the half-open range of subword positions it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordAlignment {
    ranges: Vec<Range<usize>>,
}

impl SubwordAlignment {
    /// Ranges must be non-empty, contiguous and start at 0.
    pub fn new(ranges: Vec<Range<usize>>) -> Result<Self, TreebankError> {
        let mut expected = 0;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != expected || r.end <= r.start {
                return Err(TreebankError::InvalidTree(format!(
                    "subword range {r:?} of word {i} is not contiguous"
                )));
            }
            expected = r.end;
        }
        Ok(SubwordAlignment { ranges })
    }

    /// One subword per word.
    pub fn identity(words: usize) -> Self {
        SubwordAlignment {
            ranges: (0..words).map(|i| i..i + 1).collect(),
        }
    }

    pub fn words(&self) -> usize {
        self.ranges.len()
    }

    pub fn subwords(&self) -> usize {
        self.ranges.last().map(|r| r.end).unwrap_or(0)
    }

    pub fn word_range(&self, word: usize) -> Range<usize> {
        self.ranges[word].clone()
    }

    /// Maps a 1-based inclusive word span to a 1-based inclusive subword span.
    pub fn to_subwords(&self, span: Span) -> Span {
        Span {
            start: self.ranges[span.start - 1].start + 1,
            end: self.ranges[span.end - 1].end,
        }
    }
}

/// Subword ids of a sentence plus the alignment back to its words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<TokenId>,
    pub alignment: SubwordAlignment,
}

impl EncodedSentence {
    /// Subword ids of a 1-based inclusive word span.
    pub fn span_ids(&self, span: Span) -> &[TokenId] {
        let sub = self.alignment.to_subwords(span);
        &self.ids[sub.start - 1..sub.end]
    }
}

/// Greedy longest-match-first WordPiece, cased.
///
/// A word present verbatim in the vocabulary maps to that single entry.
/// Otherwise it is split on ASCII punctuation and each piece is matched
/// greedily, continuation pieces carrying the `##` prefix. Pieces that
/// cannot be matched become `[UNK]`.
#[derive(Debug, Clone)]
pub struct WordPieceTokenizer {
    vocab: Vocabulary,
    unk: TokenId,
    max_chars: usize,
}

impl WordPieceTokenizer {
    pub fn new(vocab: Vocabulary) -> Result<Self, TreebankError> {
        let unk = vocab
            .id(UNK_TOKEN)
            .ok_or_else(|| TreebankError::Vocabulary(format!("vocabulary lacks {UNK_TOKEN}")))?;
        Ok(WordPieceTokenizer {
            vocab,
            unk,
            max_chars: 100,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn tokenize_word(&self, word: &str) -> Vec<TokenId> {
        if let Some(id) = self.vocab.id(word) {
            return vec![id];
        }
        let mut out = Vec::new();
        for piece in split_punctuation(word) {
            self.wordpiece(piece, &mut out);
        }
        if out.is_empty() {
            out.push(self.unk);
        }
        out
    }

    fn wordpiece(&self, piece: &str, out: &mut Vec<TokenId>) {
        let chars: Vec<(usize, char)> = piece.char_indices().collect();
        if chars.len() > self.max_chars {
            out.push(self.unk);
            return;
        }
        let mut found = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut hit = None;
            while end > start {
                let lo = chars[start].0;
                let hi = chars.get(end).map(|c| c.0).unwrap_or(piece.len());
                let candidate = if start == 0 {
                    piece[lo..hi].to_string()
                } else {
                    format!("{CONTINUATION}{}", &piece[lo..hi])
                };
                if let Some(id) = self.vocab.id(&candidate) {
                    hit = Some(id);
                    break;
                }
                end -= 1;
            }
            match hit {
                Some(id) => {
                    found.push(id);
                    start = end;
                }
                None => {
                    out.push(self.unk);
                    return;
                }
            }
        }
        out.extend(found);
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> EncodedSentence {
        let mut ids = Vec::new();
        let mut ranges = Vec::with_capacity(words.len());
        for w in words {
            let start = ids.len();
            ids.extend(self.tokenize_word(w.as_ref()));
            ranges.push(start..ids.len());
        }
        EncodedSentence {
            ids,
            alignment: SubwordAlignment { ranges },
        }
    }
}

fn split_punctuation(word: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, c) in word.char_indices() {
        if c.is_ascii_punctuation() {
            if start < i {
                out.push(&word[start..i]);
            }
            out.push(&word[i..i + c.len_utf8()]);
            start = i + c.len_utf8();
        } else if c.is_whitespace() {
            if start < i {
                out.push(&word[start..i]);
            }
            start = i + c.len_utf8();
        }
    }
    if start < word.len() {
        out.push(&word[start..]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> WordPieceTokenizer {
        let v = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "The", "spider", "built", "bu", "##ilt", "savings", "-", "and", "loan", "##s", "un", "##aff"];
        WordPieceTokenizer::new(Vocabulary::new(v.iter().map(|s| s.to_string()).collect()).unwrap())
            .unwrap()
    }

    #[test]
    fn whole_words_and_pieces() {
        let t = toy();
        assert_eq!(t.tokenize_word("built"), vec![7]);
        assert_eq!(t.tokenize_word("loans"), vec![13, 14]);
        assert_eq!(t.tokenize_word("savings-and-loan"), vec![10, 11, 12, 11, 13]);
        assert_eq!(t.tokenize_word("unaffected"), vec![1]);
        assert_eq!(t.tokenize_word("zzz"), vec![1]);
    }

    #[test]
    fn alignment_is_contiguous() {
        let t = toy();
        let enc = t.encode(&["The", "loans", "built"]);
        assert_eq!(enc.ids, vec![5, 13, 14, 7]);
        assert_eq!(enc.alignment.word_range(1), 1..3);
        assert_eq!(enc.alignment.to_subwords(Span::new(2, 3)), Span::new(2, 4));
        assert_eq!(enc.span_ids(Span::new(2, 2)), &[13, 14]);
        assert!(SubwordAlignment::new(enc.alignment.ranges.clone()).is_ok());
        assert!(SubwordAlignment::new(vec![0..1, 2..3]).is_err());
    }

    #[test]
    fn fragments_and_specials() {
        assert!(Vocabulary::is_fragment_or_special("##ing"));
        assert!(Vocabulary::is_fragment_or_special("[CLS]"));
        assert!(!Vocabulary::is_fragment_or_special("["));
        assert!(!Vocabulary::is_fragment_or_special("cat"));
    }
}
