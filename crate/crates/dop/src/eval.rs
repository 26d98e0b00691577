//! PARSEVAL scoring: labeled precision, labeled recall, and exact match
//! over constituent bracket multisets, with evalb-compatible conventions —
//! preterminals excluded, punctuation tokens invisible to span indexing,
//! the root bracket counted, and unparsed sentences scored as zero-bracket
//! parses (penalizing recall) rather than skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::treebank::{Tree, DEFAULT_PUNCTUATION_TAGS};

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Preterminal labels whose tokens do not advance span indices.
    pub punctuation_tags: BTreeSet<String>,
    /// Length cutoffs (gold yield length, punctuation included); one report
    /// block per cutoff.
    pub cutoffs: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            punctuation_tags: DEFAULT_PUNCTUATION_TAGS.iter().map(|s| s.to_string()).collect(),
            cutoffs: vec![40, 100],
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("corpus size mismatch: gold has {gold} sentences, test has {test}")]
    SentenceCountMismatch { gold: usize, test: usize },
}

pub type Bracket = (String, usize, usize);

/// Bracket multiset as sorted counts.
pub type BracketCounts = BTreeMap<Bracket, usize>;

fn collect_brackets(
    node: &Tree,
    pos: usize,
    punctuation: &BTreeSet<String>,
    out: &mut BracketCounts,
) -> usize {
    match node {
        Tree::Leaf { .. } => 1,
        Tree::Node { label, children } => {
            if children.is_empty() {
                return 0;
            }
            if node.is_preterminal() {
                return if punctuation.contains(label) { 0 } else { children.len() };
            }
            let mut width = 0;
            for child in children {
                width += collect_brackets(child, pos + width, punctuation, out);
            }
            if width > 0 {
                *out.entry((label.clone(), pos, pos + width)).or_insert(0) += 1;
            }
            width
        }
    }
}

/// All non-preterminal constituents of the tree as (label, start, end) with
/// punctuation-invisible span indices; zero-width brackets are dropped.
pub fn extract_brackets(tree: &Tree, punctuation: &BTreeSet<String>) -> BracketCounts {
    let mut out = BracketCounts::new();
    collect_brackets(tree, 0, punctuation, &mut out);
    out
}

fn visible_yield<'t>(node: &'t Tree, punctuation: &BTreeSet<String>, out: &mut Vec<&'t str>) {
    match node {
        Tree::Leaf { word } => out.push(word),
        Tree::Node { label, children } => {
            if node.is_preterminal() && punctuation.contains(label) {
                return;
            }
            for child in children {
                visible_yield(child, punctuation, out);
            }
        }
    }
}

fn intersection_size(a: &BracketCounts, b: &BracketCounts) -> usize {
    a.iter().map(|(bracket, &n)| n.min(b.get(bracket).copied().unwrap_or(0))).sum()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CutoffReport {
    pub cutoff: usize,
    pub sentences_scored: usize,
    pub sentences_skipped: usize,
    pub matched_brackets: usize,
    pub gold_brackets: usize,
    pub test_brackets: usize,
    pub exact_matches: usize,
}

impl CutoffReport {
    pub fn labeled_precision(&self) -> f64 {
        if self.test_brackets == 0 {
            0.0
        } else {
            100.0 * self.matched_brackets as f64 / self.test_brackets as f64
        }
    }

    pub fn labeled_recall(&self) -> f64 {
        if self.gold_brackets == 0 {
            0.0
        } else {
            100.0 * self.matched_brackets as f64 / self.gold_brackets as f64
        }
    }

    pub fn exact_match(&self) -> f64 {
        if self.sentences_scored == 0 {
            0.0
        } else {
            100.0 * self.exact_matches as f64 / self.sentences_scored as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cutoffs: Vec<CutoffReport>,
}

/// Score test parses against gold trees. `None` test entries are unparsed
/// sentences and score as zero-bracket parses. A sentence whose test yield
/// disagrees with the gold yield (after punctuation removal) is skipped and
/// counted. Cutoff stratification uses the gold yield length including
/// punctuation.
pub fn score(gold: &[Tree], test: &[Option<Tree>], config: &EvalConfig) -> Result<EvalReport, EvalError> {
    if gold.len() != test.len() {
        return Err(EvalError::SentenceCountMismatch { gold: gold.len(), test: test.len() });
    }
    let mut cutoffs: Vec<usize> = config.cutoffs.clone();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    let mut report = EvalReport {
        cutoffs: cutoffs
            .iter()
            .map(|&cutoff| CutoffReport { cutoff, ..CutoffReport::default() })
            .collect(),
    };

    for (gold_tree, test_tree) in gold.iter().zip(test) {
        let length = gold_tree.yield_words().len();
        let gold_brackets = extract_brackets(gold_tree, &config.punctuation_tags);

        let mut skipped = false;
        let test_brackets = match test_tree {
            None => BracketCounts::new(),
            Some(tree) => {
                let mut gold_yield = Vec::new();
                visible_yield(gold_tree, &config.punctuation_tags, &mut gold_yield);
                let mut test_yield = Vec::new();
                visible_yield(tree, &config.punctuation_tags, &mut test_yield);
                if gold_yield != test_yield {
                    skipped = true;
                    BracketCounts::new()
                } else {
                    extract_brackets(tree, &config.punctuation_tags)
                }
            }
        };

        let matched = intersection_size(&gold_brackets, &test_brackets);
        let exact = !skipped && gold_brackets == test_brackets;
        for block in report.cutoffs.iter_mut().filter(|b| length <= b.cutoff) {
            if skipped {
                block.sentences_skipped += 1;
                continue;
            }
            block.sentences_scored += 1;
            block.matched_brackets += matched;
            block.gold_brackets += gold_brackets.values().sum::<usize>();
            block.test_brackets += test_brackets.values().sum::<usize>();
            if exact {
                block.exact_matches += 1;
            }
        }
    }
    Ok(report)
}

/// Fixed-order key/value text block per cutoff, machine-parseable.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    for (i, block) in report.cutoffs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "cutoff = {}", block.cutoff);
        let _ = writeln!(out, "sentences_scored = {}", block.sentences_scored);
        let _ = writeln!(out, "sentences_skipped = {}", block.sentences_skipped);
        let _ = writeln!(out, "matched_brackets = {}", block.matched_brackets);
        let _ = writeln!(out, "gold_brackets = {}", block.gold_brackets);
        let _ = writeln!(out, "test_brackets = {}", block.test_brackets);
        let _ = writeln!(out, "labeled_precision = {:.2}", block.labeled_precision());
        let _ = writeln!(out, "labeled_recall = {:.2}", block.labeled_recall());
        let _ = writeln!(out, "exact_match = {:.2}", block.exact_match());
    }
    out
}

/// Per-sentence diff: brackets missing from the test parse and spurious
/// brackets it adds; only mismatched sentences are listed.
pub fn bracket_diff(gold: &[Tree], test: &[Option<Tree>], config: &EvalConfig) -> String {
    let mut out = String::new();
    for (i, (gold_tree, test_tree)) in gold.iter().zip(test).enumerate() {
        let gold_brackets = extract_brackets(gold_tree, &config.punctuation_tags);
        let test_brackets = match test_tree {
            None => BracketCounts::new(),
            Some(tree) => extract_brackets(tree, &config.punctuation_tags),
        };
        if gold_brackets == test_brackets {
            continue;
        }
        let fmt = |counts: &BracketCounts, other: &BracketCounts| -> Vec<String> {
            let mut items = Vec::new();
            for ((label, start, end), &n) in counts {
                let surplus =
                    n.saturating_sub(other.get(&(label.clone(), *start, *end)).copied().unwrap_or(0));
                for _ in 0..surplus {
                    items.push(format!("({label},{start},{end})"));
                }
            }
            items
        };
        let missing = fmt(&gold_brackets, &test_brackets);
        let spurious = fmt(&test_brackets, &gold_brackets);
        let _ = writeln!(
            out,
            "sentence {i}: missing [{}] spurious [{}]",
            missing.join(" "),
            spurious.join(" ")
        );
    }
    out
}
