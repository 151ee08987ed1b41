//! Word-to-POS projection of vocabulary distributions.
//!
//! The projection is a binary `p x c` membership matrix: column `j` has a one
//! in every POS row that vocabulary entry `j` is listed under. Entries listed
//! nowhere, `##` continuation pieces and bracketed specials fall into the
//! trailing `OTHER` row, so every column has at least one one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::provider::TokenDistribution;
use crate::treebank::{LabeledTree, Vocabulary};

pub const OTHER_CLASS: &str = "OTHER";
const BINARY_MAGIC: &[u8; 8] = b"NDDPOSM\0";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("distribution has {actual} entries, projection expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("bad projection file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// word -> POS classes it may take.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, pos: impl Into<String>) {
        self.entries.entry(word.into()).or_default().insert(pos.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn classes_of(&self, word: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(word)
    }

    /// All POS classes in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.entries.values().flatten().collect();
        set.into_iter().cloned().collect()
    }

    /// `word<TAB>POS` lines; blank lines and `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, ProjectionError> {
        let mut lex = Lexicon::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, pos) = line.split_once('\t').ok_or_else(|| ProjectionError::Lexicon {
                line: i + 1,
                message: "expected word<TAB>POS".into(),
            })?;
            let (word, pos) = (word.trim(), pos.trim());
            if word.is_empty() || pos.is_empty() {
                return Err(ProjectionError::Lexicon {
                    line: i + 1,
                    message: "empty word or POS".into(),
                });
            }
            lex.insert(word, pos);
        }
        Ok(lex)
    }

    pub fn load_tsv(path: impl AsRef<Path>) -> Result<Self, ProjectionError> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (word, classes) in &self.entries {
            for pos in classes {
                out.push_str(word);
                out.push('\t');
                out.push_str(pos);
                out.push('\n');
            }
        }
        out
    }

    /// Collects every `(word, POS)` pair of a tagged treebank.
    pub fn from_treebank<'a>(trees: impl IntoIterator<Item = &'a LabeledTree>) -> Self {
        let mut lex = Lexicon::new();
        for tree in trees {
            lex.extend_from_sentence(&tree.sentence.words, &tree.sentence.pos_tags);
        }
        lex
    }

    fn extend_from_sentence(&mut self, words: &[String], tags: &[String]) {
        for (w, p) in words.iter().zip(tags) {
            self.insert(w.clone(), p.clone());
        }
    }

    pub fn merge(&mut self, other: &Lexicon) {
        for (w, classes) in &other.entries {
            self.entries.entry(w.clone()).or_default().extend(classes.iter().cloned());
        }
    }
}

/// Binary word-to-POS membership over the model vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosProjection {
    class_names: Vec<String>,
    /// For each vocabulary index, the rows holding a one.
    columns: Vec<Vec<u32>>,
}

impl PosProjection {
    /// Vocabulary entries are matched verbatim first and then
    /// case-insensitively against the lexicon.
    pub fn build(lexicon: &Lexicon, vocab: &Vocabulary) -> Result<Self, ProjectionError> {
        if lexicon.is_empty() {
            return Err(ProjectionError::EmptyLexicon);
        }
        let mut class_names = lexicon.classes();
        class_names.retain(|c| c != OTHER_CLASS);
        class_names.push(OTHER_CLASS.to_string());
        let other = (class_names.len() - 1) as u32;
        let row: HashMap<&str, u32> = class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();

        let mut folded: HashMap<String, BTreeSet<u32>> = HashMap::new();
        for (word, classes) in &lexicon.entries {
            folded
                .entry(word.to_lowercase())
                .or_default()
                .extend(classes.iter().map(|c| row[c.as_str()]));
        }

        let columns = vocab
            .tokens()
            .iter()
            .map(|token| {
                let surface = token.trim();
                if Vocabulary::is_fragment_or_special(surface) {
                    return vec![other];
                }
                let rows: Vec<u32> = match lexicon.classes_of(surface) {
                    Some(classes) => classes.iter().map(|c| row[c.as_str()]).collect(),
                    None => folded
                        .get(&surface.to_lowercase())
                        .map(|s| s.iter().copied().collect())
                        .unwrap_or_default(),
                };
                if rows.is_empty() {
                    vec![other]
                } else {
                    rows
                }
            })
            .collect();
        Ok(PosProjection {
            class_names,
            columns,
        })
    }

    /// Class names, `OTHER` last.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.columns.len()
    }

    pub fn is_member(&self, class: usize, vocab_index: usize) -> bool {
        self.columns[vocab_index].contains(&(class as u32))
    }

    /// Dense `p x c` matrix of zeros and ones.
    pub fn dense(&self) -> Vec<Vec<u8>> {
        let mut m = vec![vec![0u8; self.columns.len()]; self.class_names.len()];
        for (j, rows) in self.columns.iter().enumerate() {
            for &r in rows {
                m[r as usize][j] = 1;
            }
        }
        m
    }

    /// `M d` without renormalization. Sums to more than one when words sit in
    /// several classes.
    pub fn project_raw(&self, probs: &[f64]) -> Result<Vec<f64>, ProjectionError> {
        if probs.len() != self.columns.len() {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.columns.len(),
                actual: probs.len(),
            });
        }
        let mut q = vec![0.0; self.class_names.len()];
        for (p, rows) in probs.iter().zip(&self.columns) {
            for &r in rows {
                q[r as usize] += p;
            }
        }
        Ok(q)
    }

    /// POS-class distribution: `M d` renormalized to unit mass.
    pub fn project(&self, dist: &TokenDistribution) -> Result<Vec<f64>, ProjectionError> {
        let mut q = self.project_raw(&dist.to_f64())?;
        let total: f64 = q.iter().sum();
        if total > 0.0 {
            q.iter_mut().for_each(|x| *x /= total);
        }
        Ok(q)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), ProjectionError> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&BINARY_VERSION.to_le_bytes())?;
        out.write_all(&(self.class_names.len() as u32).to_le_bytes())?;
        for name in &self.class_names {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
        }
        out.write_all(&(self.columns.len() as u32).to_le_bytes())?;
        for rows in &self.columns {
            out.write_all(&(rows.len() as u32).to_le_bytes())?;
            for r in rows {
                out.write_all(&r.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, ProjectionError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(ProjectionError::Format("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != BINARY_VERSION {
            return Err(ProjectionError::Format(format!("unsupported version {version}")));
        }
        let n_classes = read_u32(&mut input)? as usize;
        let mut class_names = Vec::with_capacity(n_classes);
        for _ in 0..n_classes {
            let len = read_u32(&mut input)? as usize;
            let mut buf = vec![0u8; len];
            input.read_exact(&mut buf)?;
            class_names.push(
                String::from_utf8(buf).map_err(|e| ProjectionError::Format(e.to_string()))?,
            );
        }
        if class_names.last().map(String::as_str) != Some(OTHER_CLASS) {
            return Err(ProjectionError::Format("last class must be OTHER".into()));
        }
        let n_cols = read_u32(&mut input)? as usize;
        let mut columns = Vec::with_capacity(n_cols);
        for j in 0..n_cols {
            let k = read_u32(&mut input)? as usize;
            if k == 0 {
                return Err(ProjectionError::Format(format!("column {j} has no class")));
            }
            let mut rows = Vec::with_capacity(k);
            for _ in 0..k {
                let r = read_u32(&mut input)?;
                if r as usize >= n_classes {
                    return Err(ProjectionError::Format(format!("column {j}: class {r} out of range")));
                }
                rows.push(r);
            }
            columns.push(rows);
        }
        Ok(PosProjection {
            class_names,
            columns,
        })
    }
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, ProjectionError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
