use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use super::{read_treebank_file, LabeledTree, TreebankError};

/// Labels kept in WSJ-10.
pub const WSJ10_LABELS: [&str; 5] = ["NP", "VP", "ADJP", "ADVP", "PP"];

/// POS tags treated as punctuation when stripping.
pub const PUNCTUATION_TAGS: [&str; 7] = [",", ".", ":", "``", "''", "-LRB-", "-RRB-"];

pub fn is_punctuation(tag: &str) -> bool {
    PUNCTUATION_TAGS.contains(&tag)
}

#[derive(Debug, Clone)]
pub struct Wsj10Options {
    /// Sentences must be strictly shorter than this.
    pub length_limit: usize,
    pub labels: Vec<String>,
    /// Drop punctuation before measuring length and extracting spans.
    pub strip_punctuation: bool,
}

impl Default for Wsj10Options {
    fn default() -> Self {
        Wsj10Options {
            length_limit: 10,
            labels: WSJ10_LABELS.iter().map(|s| s.to_string()).collect(),
            strip_punctuation: false,
        }
    }
}

/// Short sentences with their constituents restricted to `options.labels`.
pub fn build_wsj10<'a>(
    trees: impl IntoIterator<Item = &'a LabeledTree>,
    options: &Wsj10Options,
) -> Vec<LabeledTree> {
    trees
        .into_iter()
        .filter_map(|tree| {
            let mut tree = if options.strip_punctuation {
                tree.remove_words(is_punctuation)
            } else {
                tree.clone()
            };
            if tree.is_empty() || tree.len() >= options.length_limit {
                return None;
            }
            tree.retain_labels(|l| options.labels.iter().any(|k| k == l));
            Some(tree)
        })
        .collect()
}

/// Sections used for WSJ-10: train, development and test (02-23).
pub const WSJ10_SECTIONS: RangeInclusive<u32> = 2..=23;

fn collect_trees(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_trees(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "mrg") {
            out.push(path);
        }
    }
    Ok(())
}

/// `.mrg` files under a WSJ root laid out as `NN/wsj_NNNN.mrg`, restricted to
/// `sections`. A root without numbered section directories is read whole.
pub fn wsj_section_files(root: impl AsRef<Path>, sections: RangeInclusive<u32>) -> Result<Vec<PathBuf>, TreebankError> {
    let root = root.as_ref();
    let mut numbered: Vec<(u32, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let path = entry?.path();
        let section = path.file_name().and_then(|n| n.to_str()).and_then(|n| {
            (n.len() == 2).then(|| n.parse::<u32>().ok()).flatten()
        });
        if let (true, Some(section)) = (path.is_dir(), section) {
            numbered.push((section, path));
        }
    }
    numbered.sort();
    let mut files = Vec::new();
    if numbered.is_empty() {
        collect_trees(root, &mut files)?;
    } else {
        for (_, dir) in numbered.into_iter().filter(|(s, _)| sections.contains(s)) {
            collect_trees(&dir, &mut files)?;
        }
    }
    Ok(files)
}

/// All trees of the selected WSJ sections, in file order.
pub fn read_wsj_sections(root: impl AsRef<Path>, sections: RangeInclusive<u32>) -> Result<Vec<LabeledTree>, TreebankError> {
    let mut trees = Vec::new();
    for file in wsj_section_files(root, sections)? {
        trees.extend(read_treebank_file(file)?);
    }
    Ok(trees)
}
