//! Bracketed-treebank reading, writing, and normalization.
//!
//! Trees are the standard labeled constituency kind: nonterminal nodes with
//! ordered children, terminal leaves holding words. A nonterminal with zero
//! children is a *substitution site*; those never occur in corpus trees but
//! are the frontier nonterminals of grammar fragments.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

/// A constituency tree (or tree fragment).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    /// Nonterminal node. Empty `children` marks a substitution site.
    Node { label: String, children: Vec<Tree> },
    /// Terminal word.
    Leaf { word: String },
}

impl Tree {
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node { label: label.into(), children }
    }

    pub fn leaf(word: impl Into<String>) -> Tree {
        Tree::Leaf { word: word.into() }
    }

    /// A frontier nonterminal (substitution site).
    pub fn site(label: impl Into<String>) -> Tree {
        Tree::Node { label: label.into(), children: Vec::new() }
    }

    /// Node label for nonterminals, the word itself for terminals.
    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf { word } => word,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Tree::Leaf { .. })
    }

    pub fn is_site(&self) -> bool {
        matches!(self, Tree::Node { children, .. } if children.is_empty())
    }

    pub fn children(&self) -> &[Tree] {
        match self {
            Tree::Node { children, .. } => children,
            Tree::Leaf { .. } => &[],
        }
    }

    /// Terminal words left to right.
    pub fn yield_words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_yield(&mut out);
        out
    }

    fn collect_yield<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Tree::Leaf { word } => out.push(word),
            Tree::Node { children, .. } => {
                for c in children {
                    c.collect_yield(out);
                }
            }
        }
    }

    /// Edges on the longest root-to-leaf path; terminals count as nodes.
    /// `(A a)` has depth 1, `(S (A a) B)` has depth 2, a bare site depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Node { children, .. } => match children.iter().map(Tree::depth).max() {
                Some(d) => 1 + d,
                None => 0,
            },
        }
    }

    /// Pre-order traversal over nonterminal nodes with at least one child.
    pub fn internal_nodes(&self) -> Vec<&Tree> {
        let mut out = Vec::new();
        self.collect_internal(&mut out);
        out
    }

    fn collect_internal<'a>(&'a self, out: &mut Vec<&'a Tree>) {
        if let Tree::Node { children, .. } = self {
            if !children.is_empty() {
                out.push(self);
                for c in children {
                    c.collect_internal(out);
                }
            }
        }
    }

    /// True for a node whose children are all terminal words.
    pub fn is_preterminal(&self) -> bool {
        match self {
            Tree::Node { children, .. } => {
                !children.is_empty() && children.iter().all(Tree::is_terminal)
            }
            Tree::Leaf { .. } => false,
        }
    }

    /// Well-formedness for corpus trees: a nonterminal root and no
    /// substitution sites anywhere.
    pub fn validate_corpus_tree(&self) -> Result<(), TreebankError> {
        match self {
            Tree::Leaf { word } => Err(TreebankError::MalformedTree(format!(
                "bare terminal `{word}` cannot stand as a corpus tree"
            ))),
            Tree::Node { .. } => {
                if let Some(site) = self.find_site() {
                    Err(TreebankError::MalformedTree(format!(
                        "corpus tree contains childless nonterminal `{site}`"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn find_site(&self) -> Option<&str> {
        match self {
            Tree::Leaf { .. } => None,
            Tree::Node { label, children } => {
                if children.is_empty() {
                    return Some(label);
                }
                children.iter().find_map(Tree::find_site)
            }
        }
    }
}

/// Render a tree in single-line bracketed form: children separated by one
/// space, substitution sites rendered as bare labels. Round-trips through
/// `parse_bracketed` for corpus trees.
pub fn write_bracketed(tree: &Tree) -> String {
    let mut s = String::new();
    write_into(tree, &mut s);
    s
}

fn write_into(tree: &Tree, out: &mut String) {
    match tree {
        Tree::Leaf { word } => out.push_str(word),
        Tree::Node { label, children } => {
            if children.is_empty() {
                out.push_str(label);
            } else {
                out.push('(');
                out.push_str(label);
                for c in children {
                    out.push(' ');
                    write_into(c, out);
                }
                out.push(')');
            }
        }
    }
}

/// Where a tree came from: file (or other source name) plus 0-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceId {
    pub source: String,
    pub index: usize,
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.index)
    }
}

/// An ordered collection of corpus trees with provenance.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub trees: Vec<Tree>,
    pub sources: Vec<SourceId>,
}

impl Corpus {
    pub fn new() -> Corpus {
        Corpus::default()
    }

    pub fn push(&mut self, tree: Tree, source: SourceId) {
        self.trees.push(tree);
        self.sources.push(source);
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tree, &SourceId)> {
        self.trees.iter().zip(self.sources.iter())
    }

    /// First `n` trees and the rest, as two corpora.
    pub fn split_at(&self, n: usize) -> (Corpus, Corpus) {
        let n = n.min(self.len());
        let head = Corpus {
            trees: self.trees[..n].to_vec(),
            sources: self.sources[..n].to_vec(),
        };
        let tail = Corpus {
            trees: self.trees[n..].to_vec(),
            sources: self.sources[n..].to_vec(),
        };
        (head, tail)
    }

    pub fn select(&self, indices: &[usize]) -> Corpus {
        let mut out = Corpus::new();
        for &i in indices {
            out.push(self.trees[i].clone(), self.sources[i].clone());
        }
        out
    }

    pub fn stats(&self) -> CorpusStats {
        let mut tokens = 0usize;
        let mut labels = BTreeSet::new();
        let mut words = BTreeSet::new();
        let mut longest = 0usize;
        for t in &self.trees {
            let y = t.yield_words();
            tokens += y.len();
            longest = longest.max(y.len());
            for w in y {
                words.insert(w.to_string());
            }
            for n in t.internal_nodes() {
                labels.insert(n.label().to_string());
            }
        }
        CorpusStats {
            trees: self.len(),
            tokens,
            longest_yield: longest,
            distinct_labels: labels.len(),
            distinct_words: words.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStats {
    pub trees: usize,
    pub tokens: usize,
    pub longest_yield: usize,
    pub distinct_labels: usize,
    pub distinct_words: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum TreebankError {
    #[error("{source_name}:{line}:{col}: {msg}")]
    ParseText {
        source_name: String,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("normalization removed every constituent of {0}")]
    DegenerateTree(SourceIdBox),
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("failed to read {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

/// Boxed source id so the error stays small.
#[derive(Debug)]
pub struct SourceIdBox(pub Box<SourceId>);

impl fmt::Display for SourceIdBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token<'a> {
    Open,
    Close,
    Word(&'a str),
}

struct Lexer<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Lexer<'a> {
        Lexer { text, bytes: text.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn bump(&mut self) {
        if self.bytes[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    /// Next token plus its (line, col), or None at end of input.
    fn next_token(&mut self) -> Option<(Token<'a>, usize, usize)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.bump();
        }
        if self.pos >= self.bytes.len() {
            return None;
        }
        let (line, col) = (self.line, self.col);
        match self.bytes[self.pos] {
            b'(' => {
                self.bump();
                Some((Token::Open, line, col))
            }
            b')' => {
                self.bump();
                Some((Token::Close, line, col))
            }
            _ => {
                let start = self.pos;
                while self.pos < self.bytes.len() {
                    let b = self.bytes[self.pos];
                    if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                        break;
                    }
                    self.bump();
                }
                Some((Token::Word(&self.text[start..self.pos]), line, col))
            }
        }
    }
}

/// Parse one or more bracketed trees from `text`. An outer unlabeled wrapper
/// `( ... )` is unwrapped; each tree gets a `SourceId` with `source_name` and
/// its 0-based position.
pub fn parse_bracketed(text: &str, source_name: &str) -> Result<Corpus, TreebankError> {
    let mut lexer = Lexer::new(text);
    let mut corpus = Corpus::new();
    let err = |lexer: &Lexer, line, col, msg: String| TreebankError::ParseText {
        source_name: source_name.to_string(),
        line: if line == 0 { lexer.line } else { line },
        col: if line == 0 { lexer.col } else { col },
        msg,
    };
    while let Some((tok, line, col)) = lexer.next_token() {
        match tok {
            Token::Open => {
                let expr = parse_node(&mut lexer, source_name, true, line, col)?;
                match expr {
                    Expr::Wrapper(children) => {
                        for child in children {
                            corpus_push(&mut corpus, child, source_name)?;
                        }
                    }
                    Expr::Tree(t) => corpus_push(&mut corpus, t, source_name)?,
                }
            }
            Token::Close => {
                return Err(err(&lexer, line, col, "unmatched `)`".to_string()));
            }
            Token::Word(w) => {
                return Err(err(
                    &lexer,
                    line,
                    col,
                    format!("expected `(` to open a tree, found `{w}`"),
                ));
            }
        }
    }
    Ok(corpus)
}

fn corpus_push(corpus: &mut Corpus, tree: Tree, source_name: &str) -> Result<(), TreebankError> {
    tree.validate_corpus_tree()?;
    let index = corpus.len();
    corpus.push(tree, SourceId { source: source_name.to_string(), index });
    Ok(())
}

enum Expr {
    Tree(Tree),
    /// Unlabeled wrapper: its children become separate top-level trees.
    Wrapper(Vec<Tree>),
}

/// Parse the remainder of a node whose `(` (at `open_line:open_col`) was
/// already consumed.
fn parse_node(
    lexer: &mut Lexer,
    source_name: &str,
    top_level: bool,
    open_line: usize,
    open_col: usize,
) -> Result<Expr, TreebankError> {
    let fail = |line: usize, col: usize, msg: String| TreebankError::ParseText {
        source_name: source_name.to_string(),
        line,
        col,
        msg,
    };
    let mut label: Option<String> = None;
    let mut children: Vec<Tree> = Vec::new();
    loop {
        let Some((tok, line, col)) = lexer.next_token() else {
            return Err(fail(open_line, open_col, "unclosed `(`".to_string()));
        };
        match tok {
            Token::Word(w) => {
                if label.is_none() && children.is_empty() {
                    label = Some(w.to_string());
                } else {
                    children.push(Tree::leaf(w));
                }
            }
            Token::Open => {
                let inner = parse_node(lexer, source_name, false, line, col)?;
                match inner {
                    Expr::Tree(t) => children.push(t),
                    Expr::Wrapper(_) => unreachable!("wrappers only exist at top level"),
                }
            }
            Token::Close => {
                return match label {
                    Some(label) => {
                        if children.is_empty() {
                            Err(fail(line, col, format!("nonterminal `{label}` has no children")))
                        } else {
                            Ok(Expr::Tree(Tree::Node { label, children }))
                        }
                    }
                    None if top_level => {
                        if children.iter().any(Tree::is_terminal) {
                            Err(fail(line, col, "unlabeled wrapper contains a bare word".to_string()))
                        } else if children.is_empty() {
                            Err(fail(line, col, "empty `( )` expression".to_string()))
                        } else {
                            Ok(Expr::Wrapper(children))
                        }
                    }
                    None => Err(fail(
                        open_line,
                        open_col,
                        "missing nonterminal label (unlabeled nodes are only allowed as the outer wrapper)".to_string(),
                    )),
                };
            }
        }
    }
}

/// Parse a single bracketed fragment, where a bare token is a substitution
/// site when `site_labels` contains it and a terminal word otherwise.
/// This is the inverse of `write_bracketed` for fragment shapes, given the
/// nonterminal label set they were written with.
pub fn parse_fragment_text(
    text: &str,
    site_labels: &BTreeSet<String>,
    source_name: &str,
) -> Result<Tree, TreebankError> {
    fn reclassify(tree: Tree, site_labels: &BTreeSet<String>) -> Tree {
        match tree {
            Tree::Leaf { word } => {
                if site_labels.contains(&word) {
                    Tree::site(word)
                } else {
                    Tree::leaf(word)
                }
            }
            Tree::Node { label, children } => Tree::Node {
                label,
                children: children.into_iter().map(|c| reclassify(c, site_labels)).collect(),
            },
        }
    }

    let mut lexer = Lexer::new(text);
    let Some((tok, line, col)) = lexer.next_token() else {
        return Err(TreebankError::ParseText {
            source_name: source_name.to_string(),
            line: 1,
            col: 1,
            msg: "empty fragment".to_string(),
        });
    };
    if tok != Token::Open {
        return Err(TreebankError::ParseText {
            source_name: source_name.to_string(),
            line,
            col,
            msg: "fragment must open with `(`".to_string(),
        });
    }
    let tree = match parse_node(&mut lexer, source_name, false, line, col)? {
        Expr::Tree(t) => t,
        Expr::Wrapper(_) => unreachable!("non-top-level parse cannot yield a wrapper"),
    };
    if let Some((_, line, col)) = lexer.next_token() {
        return Err(TreebankError::ParseText {
            source_name: source_name.to_string(),
            line,
            col,
            msg: "trailing text after fragment".to_string(),
        });
    }
    Ok(reclassify(tree, site_labels))
}

/// Read and parse a treebank file.
pub fn load_corpus(path: &Path) -> Result<Corpus, TreebankError> {
    let text = std::fs::read_to_string(path).map_err(|err| TreebankError::Io {
        path: path.display().to_string(),
        err,
    })?;
    parse_bracketed(&text, &path.display().to_string())
}

/// Controls for Penn-Treebank-style cleanup.
#[derive(Debug, Clone)]
pub struct NormalizationConfig {
    /// Truncate nonterminal labels at the first `-` or `=` when the leading
    /// segment is alphabetic (`NP-SBJ-1` becomes `NP`; `-NONE-` and bracket
    /// tags are untouched).
    pub strip_function_tags: bool,
    /// Drop trailing numeric co-indices (`NP-1`, `NP=2` become `NP`).
    pub strip_coindexing: bool,
    /// Remove quote-mark preterminals (`` and '') and their tokens.
    pub remove_quote_tokens: bool,
    /// Remove `-NONE-` empty elements, deleting ancestors left childless.
    pub remove_empty_elements: bool,
    /// Tags treated as punctuation by the evaluator (kept here so one config
    /// names the whole tag policy).
    pub punctuation_tags: BTreeSet<String>,
}

pub const DEFAULT_PUNCTUATION_TAGS: [&str; 6] = [",", ".", ":", "``", "''", "-NONE-"];

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            strip_function_tags: true,
            strip_coindexing: true,
            remove_quote_tokens: true,
            remove_empty_elements: true,
            punctuation_tags: DEFAULT_PUNCTUATION_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl NormalizationConfig {
    /// Everything off: trees pass through untouched.
    pub fn none() -> Self {
        NormalizationConfig {
            strip_function_tags: false,
            strip_coindexing: false,
            remove_quote_tokens: false,
            remove_empty_elements: false,
            punctuation_tags: DEFAULT_PUNCTUATION_TAGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn strip_label(label: &str, cfg: &NormalizationConfig) -> String {
    let mut out = label;
    if cfg.strip_function_tags {
        if let Some(pos) = out.find(['-', '=']) {
            if pos > 0 && out[..pos].chars().all(|c| c.is_ascii_alphabetic()) {
                out = &out[..pos];
            }
        }
    } else if cfg.strip_coindexing {
        loop {
            let Some(pos) = out.rfind(['-', '=']) else { break };
            let suffix = &out[pos + 1..];
            if pos > 0 && !suffix.is_empty() && suffix.bytes().all(|b| b.is_ascii_digit()) {
                out = &out[..pos];
            } else {
                break;
            }
        }
    }
    out.to_string()
}

const EMPTY_ELEMENT_TAG: &str = "-NONE-";
const QUOTE_TAGS: [&str; 2] = ["``", "''"];

/// Apply the configured cleanup to one tree. Fails if normalization deletes
/// the whole tree; `source` identifies the offender in that error.
pub fn normalize(tree: &Tree, cfg: &NormalizationConfig, source: &SourceId) -> Result<Tree, TreebankError> {
    match normalize_node(tree, cfg) {
        Some(t) => Ok(t),
        None => Err(TreebankError::DegenerateTree(SourceIdBox(Box::new(source.clone())))),
    }
}

fn normalize_node(tree: &Tree, cfg: &NormalizationConfig) -> Option<Tree> {
    match tree {
        Tree::Leaf { word } => Some(Tree::leaf(word.clone())),
        Tree::Node { label, children } => {
            if cfg.remove_empty_elements && label == EMPTY_ELEMENT_TAG {
                return None;
            }
            if cfg.remove_quote_tokens && QUOTE_TAGS.contains(&label.as_str()) {
                return None;
            }
            let kept: Vec<Tree> = children.iter().filter_map(|c| normalize_node(c, cfg)).collect();
            if kept.is_empty() {
                return None;
            }
            Some(Tree::Node { label: strip_label(label, cfg), children: kept })
        }
    }
}

/// Normalize a whole corpus, preserving provenance.
pub fn normalize_corpus(corpus: &Corpus, cfg: &NormalizationConfig) -> Result<Corpus, TreebankError> {
    let mut out = Corpus::new();
    for (tree, source) in corpus.iter() {
        out.push(normalize(tree, cfg, source)?, source.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(text: &str) -> Tree {
        parse_bracketed(text, "test").unwrap().trees.remove(0)
    }

    #[test]
    fn parses_simple_tree() {
        let tree = t("(S (A a) (B b))");
        assert_eq!(
            tree,
            Tree::node("S", vec![
                Tree::node("A", vec![Tree::leaf("a")]),
                Tree::node("B", vec![Tree::leaf("b")]),
            ])
        );
    }

    #[test]
    fn unwraps_outer_wrapper() {
        let corpus = parse_bracketed("( (S (A a) (B b)) )", "test").unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.trees[0].label(), "S");
        assert_eq!(corpus.sources[0].index, 0);
    }

    #[test]
    fn multiple_trees_get_sequential_ids() {
        let corpus = parse_bracketed("(S (A a))\n( (S (B b)) )", "f.mrg").unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.sources[1].to_string(), "f.mrg:1");
    }

    #[test]
    fn round_trip_write_parse() {
        let text = "(S (NP john) (VP (V likes) (NP mary)))";
        let tree = t(text);
        assert_eq!(write_bracketed(&tree), text);
        assert_eq!(t(&write_bracketed(&tree)), tree);
    }

    #[test]
    fn site_renders_as_bare_label() {
        let frag = Tree::node("S", vec![Tree::site("NP"), Tree::site("VP")]);
        assert_eq!(write_bracketed(&frag), "(S NP VP)");
    }

    #[test]
    fn parse_error_carries_line_and_col() {
        let err = parse_bracketed("(S (A a)\n(B b", "bad").unwrap_err();
        match err {
            TreebankError::ParseText { line, col, source_name, .. } => {
                assert_eq!(source_name, "bad");
                assert_eq!(line, 2);
                assert_eq!(col, 1);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn empty_nonterminal_is_an_error() {
        assert!(parse_bracketed("(S (NP) (VP v))", "t").is_err());
        assert!(parse_bracketed("(S ((A a)))", "t").is_err());
        assert!(parse_bracketed("bare", "t").is_err());
        assert!(parse_bracketed("(S (A a))) ", "t").is_err());
    }

    #[test]
    fn depth_convention() {
        assert_eq!(t("(A a)").depth(), 1);
        assert_eq!(t("(S (A a) (B b))").depth(), 2);
        assert_eq!(t("(S (NP john) (VP (V likes) (NP mary)))").depth(), 3);
        assert_eq!(Tree::node("S", vec![Tree::node("A", vec![Tree::leaf("a")]), Tree::site("B")]).depth(), 2);
        assert_eq!(Tree::node("S", vec![Tree::site("A"), Tree::site("B")]).depth(), 1);
        assert_eq!(Tree::site("A").depth(), 0);
    }

    #[test]
    fn strips_function_tags_and_coindexing() {
        let cfg = NormalizationConfig::default();
        assert_eq!(strip_label("NP-SBJ-1", &cfg), "NP");
        assert_eq!(strip_label("NP=2", &cfg), "NP");
        assert_eq!(strip_label("-NONE-", &cfg), "-NONE-");
        assert_eq!(strip_label("-LRB-", &cfg), "-LRB-");
        assert_eq!(strip_label("PRP$", &cfg), "PRP$");
        let coindex_only = NormalizationConfig {
            strip_function_tags: false,
            ..NormalizationConfig::default()
        };
        assert_eq!(strip_label("NP-SBJ-1", &coindex_only), "NP-SBJ");
        assert_eq!(strip_label("NP-SBJ", &coindex_only), "NP-SBJ");
    }

    #[test]
    fn removes_empty_elements_recursively() {
        let corpus = parse_bracketed(
            "(S (NP-SBJ (-NONE- *T*-1)) (VP (VB go) (SBAR (-NONE- 0))))",
            "t",
        )
        .unwrap();
        let norm = normalize(&corpus.trees[0], &NormalizationConfig::default(), &corpus.sources[0]).unwrap();
        assert_eq!(write_bracketed(&norm), "(S (VP (VB go)))");
    }

    #[test]
    fn removes_quote_tokens() {
        let corpus = parse_bracketed("(S (`` ``) (NP (NN dog)) ('' ''))", "t").unwrap();
        let norm = normalize(&corpus.trees[0], &NormalizationConfig::default(), &corpus.sources[0]).unwrap();
        assert_eq!(write_bracketed(&norm), "(S (NP (NN dog)))");
    }

    #[test]
    fn degenerate_tree_reports_source() {
        let corpus = parse_bracketed("(X (-NONE- *))", "gone.mrg").unwrap();
        let err = normalize(&corpus.trees[0], &NormalizationConfig::default(), &corpus.sources[0]).unwrap_err();
        assert!(err.to_string().contains("gone.mrg:0"), "{err}");
    }

    #[test]
    fn normalization_is_idempotent() {
        let cfg = NormalizationConfig::default();
        let corpus = parse_bracketed(
            "( (S (NP-SBJ (DT the) (NN dog)) (VP (VBD barked) (NP-1 (-NONE- *)))) )",
            "t",
        )
        .unwrap();
        let once = normalize(&corpus.trees[0], &cfg, &corpus.sources[0]).unwrap();
        let twice = normalize(&once, &cfg, &corpus.sources[0]).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bracket_word_tokens_survive() {
        let tree = t("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))");
        let norm = normalize(&tree, &NormalizationConfig::default(), &SourceId { source: "t".into(), index: 0 }).unwrap();
        assert_eq!(write_bracketed(&norm), "(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))");
    }

    #[test]
    fn corpus_stats_and_split() {
        let corpus = parse_bracketed("(S (A a) (B b)) (S (A a))", "t").unwrap();
        let stats = corpus.stats();
        assert_eq!(stats.trees, 2);
        assert_eq!(stats.tokens, 3);
        assert_eq!(stats.longest_yield, 2);
        assert_eq!(stats.distinct_labels, 3);
        assert_eq!(stats.distinct_words, 2);
        let (head, tail) = corpus.split_at(1);
        assert_eq!(head.len(), 1);
        assert_eq!(tail.len(), 1);
        assert_eq!(tail.sources[0].index, 1);
    }
}
