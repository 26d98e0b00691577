//! Fragment extraction from corpus trees, restriction filtering, and the
//! counted fragment table.
//!
//! A fragment of a tree is any connected piece that starts at a nonterminal
//! node and, for every node it keeps, keeps that node's complete child
//! sequence; each kept nonterminal child is either expanded the same way or
//! left as a substitution site. The number of fragments rooted at a node `v`
//! therefore satisfies
//!
//! ```text
//! sigma(v) = product over nonterminal children c of (sigma(c) + 1)
//! ```
//!
//! (an empty product for preterminals), and a tree contributes
//! `sum over internal v of sigma(v)` fragment occurrences in total.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::heads::{nonheadword_count, HeadTable};
use crate::treebank::{parse_fragment_text, write_bracketed, Corpus, Tree, TreebankError};

/// An integer restriction that may be switched off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Finite(u32),
    Unlimited,
}

impl Bound {
    pub fn allows(self, value: usize) -> bool {
        match self {
            Bound::Finite(b) => value <= b as usize,
            Bound::Unlimited => true,
        }
    }

    /// At least `n` more levels available under this budget.
    fn at_least(self, n: u32) -> bool {
        match self {
            Bound::Finite(b) => b >= n,
            Bound::Unlimited => true,
        }
    }

    fn decrement(self) -> Bound {
        match self {
            Bound::Finite(b) => Bound::Finite(b.saturating_sub(1)),
            Bound::Unlimited => Bound::Unlimited,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Unlimited => write!(f, "unlimited"),
        }
    }
}

impl FromStr for Bound {
    type Err = String;

    fn from_str(s: &str) -> Result<Bound, String> {
        match s {
            "unlimited" | "inf" | "none" => Ok(Bound::Unlimited),
            _ => s
                .parse::<u32>()
                .map(Bound::Finite)
                .map_err(|_| format!("expected a nonnegative integer or `unlimited`, got `{s}`")),
        }
    }
}

/// The four restriction dimensions fragments are filtered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestrictionConfig {
    /// Maximum fragment depth.
    pub max_depth: Bound,
    /// Maximum number of frontier words (lexicalized frontier nonterminals
    /// do not count; only terminals do).
    pub max_frontier_words: Bound,
    /// Maximum depth for fragments with zero frontier words. Must be at
    /// least 1 when finite so depth-1 rules always survive.
    pub max_unlexicalized_depth: Bound,
    /// Maximum number of frontier words that are not the root's head word.
    pub max_nonheadwords: Bound,
}

impl Default for RestrictionConfig {
    fn default() -> Self {
        RestrictionConfig {
            max_depth: Bound::Unlimited,
            max_frontier_words: Bound::Unlimited,
            max_unlexicalized_depth: Bound::Unlimited,
            max_nonheadwords: Bound::Unlimited,
        }
    }
}

impl RestrictionConfig {
    pub fn validate(&self) -> Result<(), FragmentError> {
        if let Bound::Finite(0) = self.max_depth {
            return Err(FragmentError::InvalidRestriction(
                "max_depth must be at least 1 when finite".to_string(),
            ));
        }
        if let Bound::Finite(0) = self.max_unlexicalized_depth {
            return Err(FragmentError::InvalidRestriction(
                "max_unlexicalized_depth must be at least 1 when finite".to_string(),
            ));
        }
        Ok(())
    }
}

/// A fragment shape with its cached restriction-relevant statistics and
/// canonical text form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    shape: Tree,
    key: String,
    depth: usize,
    frontier_words: usize,
}

impl Fragment {
    pub fn new(shape: Tree) -> Fragment {
        debug_assert!(!shape.is_terminal() && !shape.is_site(), "fragment root must be expanded");
        let key = write_bracketed(&shape);
        let depth = shape.depth();
        let frontier_words = shape.yield_words().len();
        Fragment { shape, key, depth, frontier_words }
    }

    pub fn shape(&self) -> &Tree {
        &self.shape
    }

    /// Canonical single-line bracketed form; equal shapes share it.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn root_label(&self) -> &str {
        self.shape.label()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn frontier_words(&self) -> usize {
        self.frontier_words
    }

    /// Frontier in order: site labels and terminal words.
    pub fn frontier(&self) -> Vec<&Tree> {
        fn walk<'a>(t: &'a Tree, out: &mut Vec<&'a Tree>) {
            match t {
                Tree::Leaf { .. } => out.push(t),
                Tree::Node { children, .. } if children.is_empty() => out.push(t),
                Tree::Node { children, .. } => {
                    for c in children {
                        walk(c, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.shape, &mut out);
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FragmentError {
    #[error("invalid restriction: {0}")]
    InvalidRestriction(String),
    #[error("fragment enumeration would produce {count} occurrences, over the ceiling of {ceiling}")]
    Explosion { count: u128, ceiling: u128 },
    #[error("sampling could not find a depth-{target_depth} fragment in {attempts} attempts")]
    SamplingExhausted { target_depth: usize, attempts: usize },
    #[error(
        "word `{word}` collides with a nonterminal label; the fragment file \
         format cannot distinguish them (rename one in the corpus)"
    )]
    AmbiguousVocabulary { word: String },
    #[error("{source_name}:{line}: {msg}")]
    ParseTable {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error("failed to write {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

/// `sigma(node)` under a depth budget: how many fragments root at `node`
/// with depth at most `max_depth`. Saturating.
pub fn fragments_rooted_count(node: &Tree, max_depth: Bound) -> u128 {
    debug_assert!(!node.is_terminal() && !node.is_site());
    let mut product: u128 = 1;
    for child in node.children() {
        if let Tree::Node { .. } = child {
            let sub = if max_depth.at_least(2) {
                fragments_rooted_count(child, max_depth.decrement())
            } else {
                0
            };
            product = product.saturating_mul(sub.saturating_add(1));
        }
    }
    product
}

/// Total fragment occurrences a tree contributes under a depth budget:
/// `sum over internal nodes v of sigma(v)`.
pub fn fragment_occurrence_count(tree: &Tree, max_depth: Bound) -> u128 {
    tree.internal_nodes()
        .iter()
        .fold(0u128, |acc, node| acc.saturating_add(fragments_rooted_count(node, max_depth)))
}

/// All fragment shapes rooted at `node` with depth at most `budget`.
fn shapes_rooted(node: &Tree, budget: Bound) -> Vec<Tree> {
    let mut combos: Vec<Vec<Tree>> = vec![Vec::new()];
    for child in node.children() {
        let options: Vec<Tree> = match child {
            Tree::Leaf { word } => vec![Tree::leaf(word.clone())],
            Tree::Node { label, .. } => {
                let mut opts = vec![Tree::site(label.clone())];
                if budget.at_least(2) {
                    opts.extend(shapes_rooted(child, budget.decrement()));
                }
                opts
            }
        };
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for combo in &combos {
            for opt in &options {
                let mut extended = combo.clone();
                extended.push(opt.clone());
                next.push(extended);
            }
        }
        combos = next;
    }
    combos
        .into_iter()
        .map(|children| Tree::Node { label: node.label().to_string(), children })
        .collect()
}

/// Every fragment occurrence in `tree` with depth at most `max_depth`, one
/// item per occurrence (duplicate shapes re-emitted). Refuses to start when
/// the closed-form count exceeds `ceiling`.
pub fn enumerate_fragments(
    tree: &Tree,
    max_depth: Bound,
    ceiling: u128,
) -> Result<Vec<Fragment>, FragmentError> {
    let count = fragment_occurrence_count(tree, max_depth);
    if count > ceiling {
        return Err(FragmentError::Explosion { count, ceiling });
    }
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for node in tree.internal_nodes() {
        for shape in shapes_rooted(node, max_depth) {
            out.push(Fragment::new(shape));
        }
    }
    Ok(out)
}

/// One random growth from `node`: every nonterminal child with room left in
/// the budget is independently expanded with probability 1/2, recursively;
/// children at the budget edge stay substitution sites.
fn grow(node: &Tree, budget: usize, rng: &mut impl Rng) -> Tree {
    let children = node
        .children()
        .iter()
        .map(|child| match child {
            Tree::Leaf { word } => Tree::leaf(word.clone()),
            Tree::Node { label, .. } => {
                if budget >= 2 && rng.gen_bool(0.5) {
                    grow(child, budget - 1, rng)
                } else {
                    Tree::site(label.clone())
                }
            }
        })
        .collect();
    Tree::Node { label: node.label().to_string(), children }
}

pub const SAMPLE_RETRIES_PER_DRAW: usize = 100;

/// Draw `n` fragments of exactly `target_depth`: pick a tree uniformly, then
/// an internal node uniformly within it, grow randomly, and accept only
/// draws whose final depth hits the target. Each draw retries up to
/// [`SAMPLE_RETRIES_PER_DRAW`] times before the whole call fails.
pub fn sample_fragments(
    corpus: &Corpus,
    target_depth: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Fragment>, FragmentError> {
    assert!(target_depth >= 1, "fragments have depth at least 1");
    let per_tree_nodes: Vec<Vec<&Tree>> = corpus.trees.iter().map(Tree::internal_nodes).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut accepted = None;
        for _ in 0..SAMPLE_RETRIES_PER_DRAW {
            let tree_idx = rng.gen_range(0..corpus.trees.len());
            let nodes = &per_tree_nodes[tree_idx];
            let node = nodes[rng.gen_range(0..nodes.len())];
            let shape = grow(node, target_depth, rng);
            if shape.depth() == target_depth {
                accepted = Some(Fragment::new(shape));
                break;
            }
        }
        match accepted {
            Some(f) => out.push(f),
            None => {
                return Err(FragmentError::SamplingExhausted {
                    target_depth,
                    attempts: SAMPLE_RETRIES_PER_DRAW,
                })
            }
        }
    }
    Ok(out)
}

/// Does `fragment` survive all four restriction dimensions?
pub fn passes(fragment: &Fragment, cfg: &RestrictionConfig, heads: &HeadTable) -> bool {
    cfg.max_depth.allows(fragment.depth())
        && cfg.max_frontier_words.allows(fragment.frontier_words())
        && (fragment.frontier_words() >= 1 || cfg.max_unlexicalized_depth.allows(fragment.depth()))
        && match cfg.max_nonheadwords {
            Bound::Unlimited => true,
            bound => bound.allows(nonheadword_count(fragment.shape(), heads)),
        }
}

/// How a fragment table was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Exhaustive,
    /// `(depth, sample count)` pairs, besides the always-exhaustive depth 1.
    Sampled { per_depth: Vec<(usize, usize)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub count: u64,
    pub fragment: Fragment,
}

/// Counted fragments keyed by canonical text, with per-root occurrence
/// totals maintained incrementally.
#[derive(Debug, Clone)]
pub struct FragmentTable {
    entries: BTreeMap<String, TableEntry>,
    root_totals: BTreeMap<String, u64>,
    pub provenance: Provenance,
    /// Labels observed at training-tree roots; recorded by the trainer.
    pub start_labels: BTreeSet<String>,
}

impl Default for FragmentTable {
    fn default() -> Self {
        FragmentTable {
            entries: BTreeMap::new(),
            root_totals: BTreeMap::new(),
            provenance: Provenance::Exhaustive,
            start_labels: BTreeSet::new(),
        }
    }
}

impl FragmentTable {
    pub fn new() -> FragmentTable {
        FragmentTable::default()
    }

    pub fn add(&mut self, fragment: Fragment, count: u64) {
        *self.root_totals.entry(fragment.root_label().to_string()).or_insert(0) += count;
        self.entries
            .entry(fragment.key().to_string())
            .and_modify(|e| e.count += count)
            .or_insert(TableEntry { count, fragment });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, key: &str) -> u64 {
        self.entries.get(key).map_or(0, |e| e.count)
    }

    pub fn get(&self, key: &str) -> Option<&TableEntry> {
        self.entries.get(key)
    }

    /// Total occurrences of fragments rooted at `label`.
    pub fn root_total(&self, label: &str) -> u64 {
        self.root_totals.get(label).copied().unwrap_or(0)
    }

    pub fn root_totals(&self) -> &BTreeMap<String, u64> {
        &self.root_totals
    }

    /// Entries in canonical-key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &TableEntry)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e))
    }

    /// All nonterminal labels: roots, internal nodes, and site labels.
    pub fn labels(&self) -> BTreeSet<String> {
        fn walk(t: &Tree, out: &mut BTreeSet<String>) {
            if let Tree::Node { label, children } = t {
                out.insert(label.clone());
                for c in children {
                    walk(c, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        for e in self.entries.values() {
            walk(e.fragment.shape(), &mut out);
        }
        out
    }

    /// All terminal words appearing in fragments.
    pub fn lexicon(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.entries.values() {
            for w in e.fragment.shape().yield_words() {
                out.insert(w.to_string());
            }
        }
        out
    }

    /// Keep only entries passing `cfg`; totals are recomputed over the
    /// survivors, provenance and start labels carry over.
    pub fn filtered(&self, cfg: &RestrictionConfig, heads: &HeadTable) -> FragmentTable {
        let mut out = FragmentTable {
            provenance: self.provenance.clone(),
            start_labels: self.start_labels.clone(),
            ..FragmentTable::default()
        };
        for entry in self.entries.values() {
            if passes(&entry.fragment, cfg, heads) {
                out.add(entry.fragment.clone(), entry.count);
            }
        }
        out
    }

    /// Occurrence counts grouped by fragment depth.
    pub fn depth_histogram(&self) -> BTreeMap<usize, u64> {
        let mut out = BTreeMap::new();
        for e in self.entries.values() {
            *out.entry(e.fragment.depth()).or_insert(0) += e.count;
        }
        out
    }

    pub fn render(&self) -> Result<String, FragmentError> {
        let labels = self.labels();
        for word in self.lexicon() {
            if labels.contains(&word) {
                return Err(FragmentError::AmbiguousVocabulary { word });
            }
        }
        let mut out = String::new();
        match &self.provenance {
            Provenance::Exhaustive => out.push_str("#provenance\texhaustive\n"),
            Provenance::Sampled { per_depth } => {
                let plan: Vec<String> =
                    per_depth.iter().map(|(d, n)| format!("{d}:{n}")).collect();
                out.push_str(&format!("#provenance\tsampled\t{}\n", plan.join(" ")));
            }
        }
        for s in &self.start_labels {
            out.push_str(&format!("#start\t{s}\n"));
        }
        let label_list: Vec<&str> = labels.iter().map(String::as_str).collect();
        out.push_str(&format!("#labels\t{}\n", label_list.join(" ")));
        for (key, entry) in &self.entries {
            out.push_str(&format!("{}\t{}\n", entry.count, key));
        }
        Ok(out)
    }

    /// Write the line-oriented table format: `#` header lines, then
    /// `count TAB canonical_key` records in key order.
    pub fn write_file(&self, path: &Path) -> Result<(), FragmentError> {
        let text = self.render()?;
        std::fs::write(path, text).map_err(|err| FragmentError::Io {
            path: path.display().to_string(),
            err,
        })
    }

    pub fn parse(text: &str, source_name: &str) -> Result<FragmentTable, FragmentError> {
        let mut table = FragmentTable::new();
        let mut labels: BTreeSet<String> = BTreeSet::new();
        let fail = |line: usize, msg: String| FragmentError::ParseTable {
            source_name: source_name.to_string(),
            line,
            msg,
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if raw.is_empty() {
                continue;
            }
            if let Some(header) = raw.strip_prefix('#') {
                let mut fields = header.split('\t');
                match fields.next() {
                    Some("provenance") => match fields.next() {
                        Some("exhaustive") => table.provenance = Provenance::Exhaustive,
                        Some("sampled") => {
                            let plan_text = fields.next().unwrap_or("");
                            let mut per_depth = Vec::new();
                            for part in plan_text.split_whitespace() {
                                let (d, n) = part.split_once(':').ok_or_else(|| {
                                    fail(line_no, format!("bad sampling plan entry `{part}`"))
                                })?;
                                let d = d.parse().map_err(|_| {
                                    fail(line_no, format!("bad depth in plan entry `{part}`"))
                                })?;
                                let n = n.parse().map_err(|_| {
                                    fail(line_no, format!("bad count in plan entry `{part}`"))
                                })?;
                                per_depth.push((d, n));
                            }
                            table.provenance = Provenance::Sampled { per_depth };
                        }
                        other => {
                            return Err(fail(
                                line_no,
                                format!("unknown provenance `{}`", other.unwrap_or("")),
                            ))
                        }
                    },
                    Some("start") => {
                        let label = fields
                            .next()
                            .ok_or_else(|| fail(line_no, "missing start label".to_string()))?;
                        table.start_labels.insert(label.to_string());
                    }
                    Some("labels") => {
                        let list = fields
                            .next()
                            .ok_or_else(|| fail(line_no, "missing label list".to_string()))?;
                        labels.extend(list.split_whitespace().map(str::to_string));
                    }
                    other => {
                        return Err(fail(
                            line_no,
                            format!("unknown header `#{}`", other.unwrap_or("")),
                        ))
                    }
                }
                continue;
            }
            let (count_text, key) = raw
                .split_once('\t')
                .ok_or_else(|| fail(line_no, "expected `count TAB key`".to_string()))?;
            let count: u64 = count_text
                .parse()
                .map_err(|_| fail(line_no, format!("bad count `{count_text}`")))?;
            let shape = parse_fragment_text(key, &labels, source_name)?;
            table.add(Fragment::new(shape), count);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<FragmentTable, FragmentError> {
        let text = std::fs::read_to_string(path).map_err(|err| FragmentError::Io {
            path: path.display().to_string(),
            err,
        })?;
        FragmentTable::parse(&text, &path.display().to_string())
    }
}

/// Filter `fragments` through the restrictions and aggregate into a table.
pub fn collect(
    fragments: impl IntoIterator<Item = Fragment>,
    cfg: &RestrictionConfig,
    heads: &HeadTable,
) -> FragmentTable {
    let mut table = FragmentTable::new();
    for f in fragments {
        if passes(&f, cfg, heads) {
            table.add(f, 1);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(text: &str) -> Tree {
        parse_bracketed(text, "test").unwrap().trees.remove(0)
    }

    fn no_heads() -> HeadTable {
        HeadTable::parse("", "empty").unwrap()
    }

    /// Test-side oracle: enumerate fragments rooted at each node by direct
    /// recursion, independent of the production recurrence.
    fn oracle_shapes(node: &Tree, budget: Option<usize>) -> Vec<Tree> {
        let mut per_child: Vec<Vec<Tree>> = Vec::new();
        for child in node.children() {
            match child {
                Tree::Leaf { word } => per_child.push(vec![Tree::leaf(word.clone())]),
                Tree::Node { label, .. } => {
                    let mut opts = vec![Tree::site(label.clone())];
                    let can_descend = budget.map_or(true, |b| b >= 2);
                    if can_descend {
                        opts.extend(oracle_shapes(child, budget.map(|b| b - 1)));
                    }
                    per_child.push(opts);
                }
            }
        }
        let mut combos: Vec<Vec<Tree>> = vec![Vec::new()];
        for opts in per_child {
            let mut next = Vec::new();
            for c in &combos {
                for o in &opts {
                    let mut v = c.clone();
                    v.push(o.clone());
                    next.push(v);
                }
            }
            combos = next;
        }
        combos
            .into_iter()
            .map(|children| Tree::Node { label: node.label().to_string(), children })
            .collect()
    }

    fn oracle_all(tree: &Tree, budget: Option<usize>) -> Vec<Tree> {
        tree.internal_nodes()
            .iter()
            .flat_map(|n| oracle_shapes(n, budget))
            .collect()
    }

    #[test]
    fn toy_tree_has_six_fragment_occurrences() {
        let tree = t("(S (A a) (B b))");
        assert_eq!(fragment_occurrence_count(&tree, Bound::Unlimited), 6);
        let frags = enumerate_fragments(&tree, Bound::Unlimited, 1 << 20).unwrap();
        assert_eq!(frags.len(), 6);
        let mut keys: Vec<&str> = frags.iter().map(Fragment::key).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            vec!["(A a)", "(B b)", "(S (A a) (B b))", "(S (A a) B)", "(S A (B b))", "(S A B)"]
        );
    }

    #[test]
    fn depth_one_extraction_is_the_rule_set() {
        let tree = t("(S (A a) (B b))");
        let frags = enumerate_fragments(&tree, Bound::Finite(1), 1 << 20).unwrap();
        let mut keys: Vec<&str> = frags.iter().map(Fragment::key).collect();
        keys.sort_unstable();
        assert_eq!(keys, vec!["(A a)", "(B b)", "(S A B)"]);
    }

    #[test]
    fn deeper_tree_counts_match_recurrence_and_oracle() {
        let tree = t("(S (NP john) (VP (V likes) (NP mary)))");
        assert_eq!(fragments_rooted_count(&tree, Bound::Unlimited), 10);
        assert_eq!(fragment_occurrence_count(&tree, Bound::Unlimited), 17);
        let frags = enumerate_fragments(&tree, Bound::Unlimited, 1 << 20).unwrap();
        assert_eq!(frags.len(), 17);
        let mut got: Vec<String> = frags.iter().map(|f| f.key().to_string()).collect();
        let mut expect: Vec<String> =
            oracle_all(&tree, None).iter().map(write_bracketed).collect();
        got.sort();
        expect.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn bounded_enumeration_matches_oracle() {
        let tree = t("(S (NP (DT the) (NN dog)) (VP (VBD saw) (NP (DT the) (NN cat))))");
        for budget in 1..=4usize {
            let frags =
                enumerate_fragments(&tree, Bound::Finite(budget as u32), 1 << 24).unwrap();
            let oracle = oracle_all(&tree, Some(budget));
            assert_eq!(frags.len(), oracle.len(), "budget {budget}");
            assert_eq!(
                fragment_occurrence_count(&tree, Bound::Finite(budget as u32)),
                oracle.len() as u128
            );
            let mut got: Vec<String> = frags.iter().map(|f| f.key().to_string()).collect();
            let mut expect: Vec<String> = oracle.iter().map(write_bracketed).collect();
            got.sort();
            expect.sort();
            assert_eq!(got, expect, "budget {budget}");
            assert!(frags.iter().all(|f| f.depth() <= budget));
        }
    }

    #[test]
    fn explosion_ceiling_trips() {
        let tree = t("(S (NP john) (VP (V likes) (NP mary)))");
        match enumerate_fragments(&tree, Bound::Unlimited, 5) {
            Err(FragmentError::Explosion { count: 17, ceiling: 5 }) => {}
            other => panic!("expected explosion, got {other:?}"),
        }
    }

    #[test]
    fn collect_aggregates_counts_and_totals() {
        let tree = t("(S (A a) (B b))");
        let frags = enumerate_fragments(&tree, Bound::Unlimited, 1 << 20).unwrap();
        let table = collect(frags, &RestrictionConfig::default(), &no_heads());
        assert_eq!(table.len(), 6);
        assert_eq!(table.root_total("S"), 4);
        assert_eq!(table.root_total("A"), 1);
        assert_eq!(table.root_total("B"), 1);
        assert_eq!(table.count("(S A B)"), 1);
    }

    #[test]
    fn two_tree_corpus_shares_unlexicalized_fragments() {
        let corpus = parse_bracketed(
            "(S (NP john) (VP (V likes) (NP mary))) (S (NP peter) (VP (V hates) (NP susan)))",
            "toy",
        )
        .unwrap();
        let mut all = Vec::new();
        for tree in &corpus.trees {
            all.extend(enumerate_fragments(tree, Bound::Unlimited, 1 << 20).unwrap());
        }
        assert_eq!(all.len(), 34);
        let table = collect(all, &RestrictionConfig::default(), &no_heads());
        assert_eq!(table.count("(S NP VP)"), 2);
        assert_eq!(table.root_total("S"), 20);
        assert_eq!(table.root_total("NP"), 4);
    }

    #[test]
    fn restriction_dimensions() {
        let heads = HeadTable::wsj_default();
        let labels: BTreeSet<String> =
            ["S", "NP", "VP", "V"].into_iter().map(str::to_string).collect();
        let lexicalized =
            Fragment::new(parse_fragment_text("(S (NP john) (VP V NP))", &labels, "t").unwrap());
        assert_eq!(lexicalized.depth(), 2);
        assert_eq!(lexicalized.frontier_words(), 1);

        let base = RestrictionConfig::default();
        assert!(passes(&lexicalized, &base, &heads));
        let words0 = RestrictionConfig { max_frontier_words: Bound::Finite(0), ..base };
        assert!(!passes(&lexicalized, &words0, &heads));
        let words1 = RestrictionConfig { max_frontier_words: Bound::Finite(1), ..base };
        assert!(passes(&lexicalized, &words1, &heads));
        // Head of S percolates from VP, which is a site here, so "john" is a
        // nonheadword.
        let nhw0 = RestrictionConfig { max_nonheadwords: Bound::Finite(0), ..base };
        assert!(!passes(&lexicalized, &nhw0, &heads));

        let unlex = Fragment::new(Tree::node(
            "S",
            vec![Tree::site("NP"), Tree::node("VP", vec![Tree::site("V"), Tree::site("NP")])],
        ));
        assert_eq!(unlex.frontier_words(), 0);
        let unlex1 = RestrictionConfig { max_unlexicalized_depth: Bound::Finite(1), ..base };
        assert!(!passes(&unlex, &unlex1, &heads));
        let unlex2 = RestrictionConfig { max_unlexicalized_depth: Bound::Finite(2), ..base };
        assert!(passes(&unlex, &unlex2, &heads));
        // A lexicalized fragment ignores the unlexicalized-depth bound.
        assert!(passes(&lexicalized, &unlex1, &heads));
    }

    #[test]
    fn depth_one_fragments_always_pass() {
        let heads = HeadTable::wsj_default();
        let tight = RestrictionConfig {
            max_depth: Bound::Finite(1),
            max_frontier_words: Bound::Finite(0),
            max_unlexicalized_depth: Bound::Finite(1),
            max_nonheadwords: Bound::Finite(0),
        };
        let rule = Fragment::new(Tree::node("S", vec![Tree::site("NP"), Tree::site("VP")]));
        assert!(passes(&rule, &tight, &heads));
        let lex = Fragment::new(t("(NN dog)"));
        // One frontier word, but it is the head word.
        let lex_ok = RestrictionConfig { max_frontier_words: Bound::Finite(1), ..tight };
        assert!(passes(&lex, &lex_ok, &heads));
    }

    #[test]
    fn sampling_hits_only_target_depth() {
        let corpus = parse_bracketed("(S (A a) (B b))", "toy").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let frags = sample_fragments(&corpus, 2, 1000, &mut rng).unwrap();
        assert_eq!(frags.len(), 1000);
        let allowed: BTreeSet<&str> =
            ["(S (A a) B)", "(S A (B b))", "(S (A a) (B b))"].into_iter().collect();
        let mut seen = BTreeSet::new();
        for f in &frags {
            assert_eq!(f.depth(), 2);
            assert!(allowed.contains(f.key()), "unexpected sample {}", f.key());
            seen.insert(f.key().to_string());
        }
        // With 1000 draws at coin-flip odds, all three shapes appear.
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let corpus =
            parse_bracketed("(S (NP john) (VP (V likes) (NP mary))) (S (A a) (B b))", "toy")
                .unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_fragments(&corpus, 2, 50, &mut rng)
                .unwrap()
                .iter()
                .map(|f| f.key().to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn sampling_exhaustion_reports_error() {
        let corpus = parse_bracketed("(A a)", "toy").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        match sample_fragments(&corpus, 5, 1, &mut rng) {
            Err(FragmentError::SamplingExhausted { target_depth: 5, .. }) => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn table_file_round_trip() {
        let corpus = parse_bracketed(
            "(S (NP john) (VP (V likes) (NP mary))) (S (NP peter) (VP (V hates) (NP susan)))",
            "toy",
        )
        .unwrap();
        let mut all = Vec::new();
        for tree in &corpus.trees {
            all.extend(enumerate_fragments(tree, Bound::Unlimited, 1 << 20).unwrap());
        }
        let mut table = collect(all, &RestrictionConfig::default(), &no_heads());
        table.start_labels.insert("S".to_string());
        table.provenance = Provenance::Sampled { per_depth: vec![(2, 100), (3, 50)] };

        let text = table.render().unwrap();
        let reread = FragmentTable::parse(&text, "round").unwrap();
        assert_eq!(reread.len(), table.len());
        assert_eq!(reread.root_totals(), table.root_totals());
        assert_eq!(reread.start_labels, table.start_labels);
        assert_eq!(reread.provenance, table.provenance);
        for (key, entry) in table.iter() {
            let got = reread.get(key).unwrap();
            assert_eq!(got.count, entry.count);
            assert_eq!(got.fragment, entry.fragment);
        }
        // Deterministic rendering.
        assert_eq!(reread.render().unwrap(), text);
    }

    #[test]
    fn sites_and_words_reload_distinctly() {
        let mut table = FragmentTable::new();
        table.add(Fragment::new(t("(NP (NN dog))")), 1);
        table.add(Fragment::new(Tree::node("NP", vec![Tree::site("NN")])), 2);
        table.add(Fragment::new(t("(NN dog)")), 3);
        let text = table.render().unwrap();
        let reread = FragmentTable::parse(&text, "round").unwrap();
        let site_rule = reread.get("(NP NN)").unwrap();
        assert!(site_rule.fragment.shape().children()[0].is_site());
        assert_eq!(site_rule.fragment.frontier_words(), 0);
        let lex = reread.get("(NN dog)").unwrap();
        assert_eq!(lex.fragment.frontier_words(), 1);
    }

    #[test]
    fn vocabulary_label_collision_is_rejected() {
        let mut table = FragmentTable::new();
        table.add(Fragment::new(t("(NP (NN dog))")), 1);
        // The word "NP" collides with the label NP.
        table.add(Fragment::new(t("(NNP NP)")), 1);
        match table.render() {
            Err(FragmentError::AmbiguousVocabulary { word }) => assert_eq!(word, "NP"),
            other => panic!("expected collision error, got {other:?}"),
        }
    }

    #[test]
    fn filtered_recomputes_totals() {
        let tree = t("(S (NP john) (VP (V likes) (NP mary)))");
        let frags = enumerate_fragments(&tree, Bound::Unlimited, 1 << 20).unwrap();
        let table = collect(frags, &RestrictionConfig::default(), &no_heads());
        assert_eq!(table.root_total("S"), 10);
        let cfg = RestrictionConfig { max_depth: Bound::Finite(1), ..RestrictionConfig::default() };
        let filtered = table.filtered(&cfg, &no_heads());
        assert_eq!(filtered.root_total("S"), 1);
        assert_eq!(filtered.len(), 5);
    }

    #[test]
    fn bound_parsing() {
        assert_eq!("12".parse::<Bound>().unwrap(), Bound::Finite(12));
        assert_eq!("unlimited".parse::<Bound>().unwrap(), Bound::Unlimited);
        assert_eq!("inf".parse::<Bound>().unwrap(), Bound::Unlimited);
        assert!("-3".parse::<Bound>().is_err());
        assert_eq!(Bound::Finite(6).to_string(), "6");
        assert_eq!(Bound::Unlimited.to_string(), "unlimited");
        assert!(RestrictionConfig {
            max_unlexicalized_depth: Bound::Finite(0),
            ..RestrictionConfig::default()
        }
        .validate()
        .is_err());
    }
}
