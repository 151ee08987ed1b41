//! Penn Treebank s-expressions.

use std::path::Path;

use super::{LabeledSpan, LabeledTree, Sentence, TreebankError};

const ROOT_LABELS: [&str; 3] = ["", "ROOT", "TOP"];
const TRACE_TAG: &str = "-NONE-";

#[derive(Debug, Clone, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Token<'_>)> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Token::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Token::Atom(&text[start..i])));
            }
        }
    }
    out
}

#[derive(Debug)]
enum Node {
    Leaf { tag: String, word: String },
    Inner { label: String, children: Vec<Node> },
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> TreebankError {
        TreebankError::MalformedBracket {
            offset,
            message: message.into(),
        }
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.0).unwrap_or(self.len)
    }

    fn node(&mut self) -> Result<Node, TreebankError> {
        let open_at = self.offset();
        match self.tokens.get(self.pos) {
            Some((_, Token::Open)) => self.pos += 1,
            _ => return Err(self.err(open_at, "expected '('")),
        }
        let label = match self.tokens.get(self.pos) {
            Some((_, Token::Atom(a))) => {
                self.pos += 1;
                a.to_string()
            }
            _ => String::new(),
        };
        let mut children = Vec::new();
        let mut words = Vec::new();
        loop {
            match self.tokens.get(self.pos) {
                None => return Err(self.err(self.len, format!("unclosed '(' opened at byte {open_at}"))),
                Some((_, Token::Close)) => {
                    self.pos += 1;
                    break;
                }
                Some((_, Token::Open)) => children.push(self.node()?),
                Some((at, Token::Atom(a))) => {
                    words.push((*at, a.to_string()));
                    self.pos += 1;
                }
            }
        }
        match (children.is_empty(), words.len()) {
            (true, 1) if !label.is_empty() => Ok(Node::Leaf {
                tag: label,
                word: words.pop().unwrap().1,
            }),
            (false, 0) => Ok(Node::Inner { label, children }),
            (true, 0) => Err(self.err(open_at, "empty constituent")),
            (true, 1) => Err(self.err(open_at, "word without a POS tag")),
            _ => Err(self.err(words[0].0, "bare word inside a phrase")),
        }
    }
}

/// Drops traces and any phrase left without words.
fn prune(node: Node) -> Option<Node> {
    match node {
        Node::Leaf { ref tag, .. } if tag == TRACE_TAG => None,
        leaf @ Node::Leaf { .. } => Some(leaf),
        Node::Inner { label, children } => {
            let children: Vec<Node> = children.into_iter().filter_map(prune).collect();
            if children.is_empty() {
                None
            } else {
                Some(Node::Inner { label, children })
            }
        }
    }
}

/// `NP-SBJ-1` -> `NP`, `NP=2` -> `NP`, `PRT|ADVP` -> `PRT`; `-NONE-`-style labels untouched.
fn bare_label(label: &str) -> String {
    if label.starts_with('-') {
        return label.to_string();
    }
    label
        .split(['-', '=', '|'])
        .next()
        .unwrap_or(label)
        .to_string()
}

fn collect(node: &Node, sentence: &mut Sentence, spans: &mut Vec<LabeledSpan>, is_root: bool) {
    match node {
        Node::Leaf { tag, word } => {
            sentence.words.push(word.clone());
            sentence.pos_tags.push(tag.clone());
        }
        Node::Inner { label, children } => {
            let skip = is_root && ROOT_LABELS.contains(&label.as_str());
            let start = sentence.len() + 1;
            let slot = spans.len();
            if !skip {
                spans.push(LabeledSpan::new(start, start, bare_label(label)));
            }
            for child in children {
                collect(child, sentence, spans, false);
            }
            if !skip {
                spans[slot].end = sentence.len();
            }
        }
    }
}

fn to_tree(node: Node, offset: usize) -> Result<LabeledTree, TreebankError> {
    let node = prune(node).ok_or(TreebankError::MalformedBracket {
        offset,
        message: "tree has no words".into(),
    })?;
    let mut sentence = Sentence::default();
    let mut spans = Vec::new();
    collect(&node, &mut sentence, &mut spans, true);
    LabeledTree::new(sentence, spans)
}

/// Parses exactly one tree.
///
/// Preterminals become POS tags, other phrases become labeled spans. An
/// outermost phrase labeled `ROOT`, `TOP` or nothing is treated as a wrapper.
/// Function tags and co-indices are stripped; `-NONE-` traces and phrases
/// dominating only traces are removed.
pub fn parse_bracket(text: &str) -> Result<LabeledTree, TreebankError> {
    let mut trees = parse_treebank(text)?;
    match trees.len() {
        1 => Ok(trees.pop().unwrap()),
        0 => Err(TreebankError::MalformedBracket {
            offset: 0,
            message: "no tree found".into(),
        }),
        n => Err(TreebankError::MalformedBracket {
            offset: 0,
            message: format!("expected one tree, found {n}"),
        }),
    }
}

/// Parses a stream of trees (one per line or free-form s-expressions).
pub fn parse_treebank(text: &str) -> Result<Vec<LabeledTree>, TreebankError> {
    let mut parser = Parser {
        tokens: lex(text),
        pos: 0,
        len: text.len(),
    };
    let mut trees = Vec::new();
    while parser.pos < parser.tokens.len() {
        let at = parser.offset();
        if parser.tokens[parser.pos].1 == Token::Close {
            return Err(parser.err(at, "unbalanced ')'"));
        }
        let node = parser.node()?;
        trees.push(to_tree(node, at)?);
    }
    Ok(trees)
}

pub fn read_treebank_file(path: impl AsRef<Path>) -> Result<Vec<LabeledTree>, TreebankError> {
    parse_treebank(&std::fs::read_to_string(path)?)
}

/// Renders a tree as a single-line bracket string wrapped in `(ROOT ...)`.
///
/// Words not covered by any span hang directly from the root.
pub fn emit_bracket(tree: &LabeledTree) -> String {
    let mut order: Vec<&LabeledSpan> = tree.spans.iter().collect();
    order.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
    let mut out = String::from("(ROOT");
    let mut open_ends: Vec<usize> = Vec::new();
    let mut next = order.iter().peekable();
    for (idx, (word, tag)) in tree
        .sentence
        .words
        .iter()
        .zip(&tree.sentence.pos_tags)
        .enumerate()
    {
        let k = idx + 1;
        while let Some(sp) = next.next_if(|sp| sp.start == k) {
            out.push_str(" (");
            out.push_str(&sp.label);
            open_ends.push(sp.end);
        }
        out.push_str(&format!(" ({tag} {word})"));
        while open_ends.last() == Some(&k) {
            open_ends.pop();
            out.push(')');
        }
    }
    out.push(')');
    out
}
