//! CKY chart parsing over a compiled fragment grammar: chart construction
//! with per-cell beam pruning, exact k-best derivation extraction, and
//! most-probable-parse selection by summing derivation probabilities per
//! tree. Also hosts an independent brute-force composition enumerator used
//! as a test oracle.
//!
//! Derivation probabilities are always recomputed as the left-to-right
//! product of fragment probabilities in leftmost-substitution order, on both
//! the chart path and the oracle path, so equal derivations carry
//! bit-identical probabilities regardless of how the chart associated the
//! partial products.
//!
//! K-best extraction is the lazy ranked-backpointer expansion and is exact
//! on cycle-free charts. Unary fragment cycles (a chain of unary fragments
//! leading back to the same label) cannot arise from finite training
//! corpora with relative-frequency mass on every loop exit, but hand-built
//! models can contain them; derivations that re-enter an item while that
//! item's rank list is being extended are deferred to a bounded retry pool,
//! so cyclic derivations enumerate up to a fixed number of deferrals and
//! the extractor always terminates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::fragments::{Fragment, FragmentTable};
use crate::grammar::{CompiledGrammar, FragmentId, Symbol};
use crate::model::{unknown_word_fragments, ProbabilityModel};
use crate::treebank::{write_bracketed, Tree};

/// How often a deferred (re-entrant) k-best candidate is re-attempted
/// before being abandoned; only cyclic charts ever defer.
const REENTRANT_RETRY_LIMIT: u32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum ParserError {
    #[error("oracle infeasible: {compositions} compositions exceed ceiling {ceiling}")]
    OracleInfeasible { compositions: usize, ceiling: usize },
    #[error("oracle infeasible: unary fragment cycle admits unboundedly many derivations")]
    OracleUnaryCycle,
}

#[derive(Debug, Clone, Copy)]
pub struct ParserConfig {
    /// Per-cell pruning ratio; 0 disables pruning.
    pub beam: f64,
    /// Number of best derivations to extract.
    pub k: usize,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig { beam: 1e-5, k: 1000 }
    }
}

/// One backpointer: a rule application (or lexical seeding) reaching an
/// item. `fragment` is set when the application completes a fragment.
#[derive(Debug, Clone)]
pub struct Edge {
    pub prob: f64,
    pub fragment: Option<FragmentId>,
    pub tails: Vec<(usize, usize, Symbol)>,
}

#[derive(Debug, Clone)]
pub struct ChartItem {
    pub best_inside: f64,
    pub edges: Vec<Edge>,
}

#[derive(Debug)]
pub struct Chart {
    pub n: usize,
    cells: Vec<BTreeMap<Symbol, ChartItem>>,
    /// Per-sentence lexical fragments for unknown words; fragment ids at and
    /// above the grammar's registry length index into this list.
    pub injected: Vec<Fragment>,
    pub injected_probs: Vec<f64>,
    pub pruned_items: usize,
}

impl Chart {
    fn index(&self, start: usize, end: usize) -> usize {
        start * (self.n + 1) + end
    }

    pub fn cell(&self, start: usize, end: usize) -> &BTreeMap<Symbol, ChartItem> {
        &self.cells[self.index(start, end)]
    }

    fn cell_mut(&mut self, start: usize, end: usize) -> &mut BTreeMap<Symbol, ChartItem> {
        let idx = self.index(start, end);
        &mut self.cells[idx]
    }

    pub fn item(&self, start: usize, end: usize, symbol: Symbol) -> Option<&ChartItem> {
        self.cell(start, end).get(&symbol)
    }

    /// All items as (symbol, start, end) triples, for pruning-monotonicity
    /// checks.
    pub fn item_set(&self) -> HashSet<(Symbol, usize, usize)> {
        let mut set = HashSet::new();
        for start in 0..self.n {
            for end in start + 1..=self.n {
                for &symbol in self.cell(start, end).keys() {
                    set.insert((symbol, start, end));
                }
            }
        }
        set
    }

    pub fn item_count(&self) -> usize {
        self.cells.iter().map(BTreeMap::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|c| c.values())
            .map(|item| item.edges.len())
            .sum()
    }

    pub fn fragment_prob(&self, grammar: &CompiledGrammar, id: FragmentId) -> f64 {
        let base = grammar.fragment_count() as u32;
        if id < base {
            grammar.fragment_prob(id)
        } else {
            self.injected_probs[(id - base) as usize]
        }
    }

    fn fragment_key<'a>(&'a self, grammar: &'a CompiledGrammar, id: FragmentId) -> &'a str {
        let base = grammar.fragment_count() as u32;
        if id < base {
            grammar.fragment(id).key()
        } else {
            self.injected[(id - base) as usize].key()
        }
    }
}

/// Bottom-up CKY over the binarized rules with unary closure per cell.
/// Unknown words (absent from the grammar's terminal alphabet) are expanded
/// into depth-1 lexical fragments via the model's unknown-word component and
/// injected as per-sentence chart entries.
///
/// After each cell completes, any item whose best_inside × label prior falls
/// below `beam` × the best such product in the cell is removed. Terminal
/// items are bookkeeping for word consumption: they are never pruned and do
/// not participate in the cell maximum.
pub fn build_chart(
    words: &[String],
    grammar: &CompiledGrammar,
    model: &ProbabilityModel,
    beam: f64,
) -> Chart {
    let n = words.len();
    let mut chart = Chart {
        n,
        cells: vec![BTreeMap::new(); (n + 1) * (n + 1)],
        injected: Vec::new(),
        injected_probs: Vec::new(),
        pruned_items: 0,
    };
    if n == 0 {
        return chart;
    }

    for (i, word) in words.iter().enumerate() {
        if let Some(term) = grammar.lookup_terminal(word) {
            chart.cell_mut(i, i + 1).insert(
                term,
                ChartItem {
                    best_inside: 1.0,
                    edges: vec![Edge { prob: 1.0, fragment: None, tails: Vec::new() }],
                },
            );
        } else if let Some(unknown) = &model.unknown {
            for (fragment, prob) in unknown_word_fragments(word, i == 0, unknown) {
                let Some(symbol) = grammar.lookup_nonterminal(fragment.root_label()) else {
                    continue;
                };
                let id = grammar.fragment_count() + chart.injected.len();
                chart.injected.push(fragment);
                chart.injected_probs.push(prob);
                let edge = Edge { prob, fragment: Some(id as u32), tails: Vec::new() };
                let item = chart.cell_mut(i, i + 1).entry(symbol).or_insert(ChartItem {
                    best_inside: 0.0,
                    edges: Vec::new(),
                });
                item.best_inside = item.best_inside.max(prob);
                item.edges.push(edge);
            }
        }
        unary_closure(&mut chart, grammar, i, i + 1);
        prune_cell(&mut chart, grammar, i, i + 1, beam);
    }

    for span in 2..=n {
        for start in 0..=n - span {
            let end = start + span;
            for mid in start + 1..end {
                let left: Vec<(Symbol, f64)> = chart
                    .cell(start, mid)
                    .iter()
                    .map(|(&s, item)| (s, item.best_inside))
                    .collect();
                for (lsym, linside) in left {
                    for &rid in grammar.binary_rules_with_left(lsym) {
                        let rule = grammar.rule(rid);
                        let rsym = rule.rhs[1];
                        let Some(ritem) = chart.cell(mid, end).get(&rsym) else { continue };
                        let inside = linside * ritem.best_inside * rule.probability;
                        let edge = Edge {
                            prob: rule.probability,
                            fragment: rule.fragment,
                            tails: vec![(start, mid, lsym), (mid, end, rsym)],
                        };
                        let item = chart.cell_mut(start, end).entry(rule.lhs).or_insert(
                            ChartItem { best_inside: 0.0, edges: Vec::new() },
                        );
                        item.best_inside = item.best_inside.max(inside);
                        item.edges.push(edge);
                    }
                }
            }
            unary_closure(&mut chart, grammar, start, end);
            prune_cell(&mut chart, grammar, start, end, beam);
        }
    }
    chart
}

/// Apply unary rules within a cell to a fixpoint. Each unary rule is applied
/// at most once as an edge (structural termination even for probability-1
/// cycles); best_inside values are re-swept until stable, which terminates
/// because rule probabilities never exceed 1.
fn unary_closure(chart: &mut Chart, grammar: &CompiledGrammar, start: usize, end: usize) {
    let mut applied: HashSet<u32> = HashSet::new();
    loop {
        let mut changed = false;
        let snapshot: Vec<(Symbol, f64)> = chart
            .cell(start, end)
            .iter()
            .map(|(&s, item)| (s, item.best_inside))
            .collect();
        for (child, child_inside) in snapshot {
            for &rid in grammar.unary_rules_with_child(child) {
                let rule = grammar.rule(rid);
                let inside = child_inside * rule.probability;
                let cell = chart.cell_mut(start, end);
                let item = cell.entry(rule.lhs).or_insert_with(|| {
                    changed = true;
                    ChartItem { best_inside: 0.0, edges: Vec::new() }
                });
                if applied.insert(rid) {
                    item.edges.push(Edge {
                        prob: rule.probability,
                        fragment: rule.fragment,
                        tails: vec![(start, end, child)],
                    });
                    changed = true;
                }
                if inside > item.best_inside {
                    item.best_inside = inside;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
}

fn prune_cell(chart: &mut Chart, grammar: &CompiledGrammar, start: usize, end: usize, beam: f64) {
    if beam <= 0.0 {
        return;
    }
    let cell = chart.cell(start, end);
    let best = cell
        .iter()
        .filter(|(s, _)| !matches!(s, Symbol::Terminal(_)))
        .map(|(&s, item)| item.best_inside * grammar.prior(s))
        .fold(0.0_f64, f64::max);
    if best <= 0.0 {
        return;
    }
    let threshold = beam * best;
    let doomed: Vec<Symbol> = cell
        .iter()
        .filter(|(&s, item)| {
            !matches!(s, Symbol::Terminal(_)) && item.best_inside * grammar.prior(s) < threshold
        })
        .map(|(&s, _)| s)
        .collect();
    if doomed.is_empty() {
        return;
    }
    let doomed_set: HashSet<Symbol> = doomed.iter().copied().collect();
    let cell = chart.cell_mut(start, end);
    for symbol in &doomed {
        cell.remove(symbol);
    }
    // Unary edges inside this cell may reference removed items.
    for item in cell.values_mut() {
        item.edges.retain(|edge| {
            edge.tails
                .iter()
                .all(|&(i, j, sym)| (i, j) != (start, end) || !doomed_set.contains(&sym))
        });
    }
    chart.pruned_items += doomed.len();
}

/// One extracted derivation: fragment ids in leftmost-substitution order.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub fragments: Vec<FragmentId>,
    /// Left-to-right product of the fragment probabilities.
    pub probability: f64,
    /// Canonical text: fragment keys joined by spaces; the tie-break key.
    pub text: String,
}

type ItemKey = (usize, usize, Symbol);

struct HeapEntry {
    edge: usize,
    ranks: Vec<usize>,
    deriv: Rc<Derivation>,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Max-heap: higher probability first, then lexicographically smaller
    // derivation text.
    fn cmp(&self, other: &Self) -> Ordering {
        self.deriv
            .probability
            .total_cmp(&other.deriv.probability)
            .then_with(|| other.deriv.text.cmp(&self.deriv.text))
    }
}

#[derive(Default)]
struct RankList {
    initialized: bool,
    edges: Vec<Edge>,
    derivs: Vec<Rc<Derivation>>,
    frontier: BinaryHeap<HeapEntry>,
    seen: HashSet<(usize, Vec<usize>)>,
    /// Candidates whose tails were unavailable mid-expansion (cycles only),
    /// re-attempted on later pops up to the retry limit.
    deferred: Vec<(usize, Vec<usize>, u32)>,
}

struct KBestExtractor<'a> {
    chart: &'a Chart,
    grammar: &'a CompiledGrammar,
    lists: HashMap<ItemKey, RankList>,
    in_progress: HashSet<ItemKey>,
}

impl<'a> KBestExtractor<'a> {
    fn new(chart: &'a Chart, grammar: &'a CompiledGrammar) -> Self {
        KBestExtractor { chart, grammar, lists: HashMap::new(), in_progress: HashSet::new() }
    }

    fn make_derivation(&mut self, key: ItemKey, edge_idx: usize, ranks: &[usize]) -> Option<Rc<Derivation>> {
        let edge = self.lists[&key].edges[edge_idx].clone();
        let mut fragments = Vec::new();
        if let Some(f) = edge.fragment {
            fragments.push(f);
        }
        for (t, &(i, j, sym)) in edge.tails.iter().enumerate() {
            let tail = self.derivation((i, j, sym), ranks[t])?;
            fragments.extend_from_slice(&tail.fragments);
        }
        let probability = fragments
            .iter()
            .fold(1.0_f64, |acc, &id| acc * self.chart.fragment_prob(self.grammar, id));
        let text = fragments
            .iter()
            .map(|&id| self.chart.fragment_key(self.grammar, id))
            .collect::<Vec<_>>()
            .join(" ");
        Some(Rc::new(Derivation { fragments, probability, text }))
    }

    fn try_candidate(&mut self, key: ItemKey, edge_idx: usize, ranks: Vec<usize>, attempts: u32) {
        if self.lists[&key].seen.contains(&(edge_idx, ranks.clone())) {
            return;
        }
        match self.make_derivation(key, edge_idx, &ranks) {
            Some(deriv) => {
                let list = self.lists.get_mut(&key).unwrap();
                list.seen.insert((edge_idx, ranks.clone()));
                list.frontier.push(HeapEntry { edge: edge_idx, ranks, deriv });
            }
            None if attempts < REENTRANT_RETRY_LIMIT => {
                self.lists.get_mut(&key).unwrap().deferred.push((edge_idx, ranks, attempts + 1));
            }
            None => {}
        }
    }

    /// The rank-th best derivation of an item, or None if fewer exist.
    fn derivation(&mut self, key: ItemKey, rank: usize) -> Option<Rc<Derivation>> {
        if let Some(list) = self.lists.get(&key) {
            if let Some(d) = list.derivs.get(rank) {
                return Some(d.clone());
            }
        }
        if self.in_progress.contains(&key) {
            return None;
        }
        self.in_progress.insert(key);
        if !self.lists.get(&key).map_or(false, |l| l.initialized) {
            let edges = self
                .chart
                .item(key.0, key.1, key.2)
                .map_or(Vec::new(), |item| item.edges.clone());
            let list = self.lists.entry(key).or_default();
            list.initialized = true;
            list.edges = edges;
            for edge_idx in 0..self.lists[&key].edges.len() {
                let arity = self.lists[&key].edges[edge_idx].tails.len();
                self.try_candidate(key, edge_idx, vec![0; arity], 0);
            }
        }
        loop {
            if self.lists[&key].derivs.len() > rank {
                break;
            }
            // Re-attempt deferred candidates; only cyclic charts have any.
            let deferred = std::mem::take(&mut self.lists.get_mut(&key).unwrap().deferred);
            for (edge_idx, ranks, attempts) in deferred {
                self.try_candidate(key, edge_idx, ranks, attempts);
            }
            let Some(top) = self.lists.get_mut(&key).unwrap().frontier.pop() else {
                break;
            };
            self.lists.get_mut(&key).unwrap().derivs.push(top.deriv);
            for t in 0..top.ranks.len() {
                let mut ranks = top.ranks.clone();
                ranks[t] += 1;
                self.try_candidate(key, top.edge, ranks, 0);
            }
        }
        self.in_progress.remove(&key);
        self.lists[&key].derivs.get(rank).cloned()
    }
}

/// The k best distinct leftmost derivations over full-span start-symbol
/// items, merged across start symbols, sorted by probability descending
/// with ties broken by canonical derivation text ascending.
pub fn kbest(chart: &Chart, grammar: &CompiledGrammar, k: usize) -> Vec<Derivation> {
    if chart.n == 0 || k == 0 {
        return Vec::new();
    }
    let mut extractor = KBestExtractor::new(chart, grammar);
    let mut streams: Vec<(ItemKey, usize)> = Vec::new();
    let mut merge: BinaryHeap<HeapEntry> = BinaryHeap::new();
    for &start in grammar.start_symbols() {
        let key = (0, chart.n, start);
        if chart.item(0, chart.n, start).is_some() {
            if let Some(d) = extractor.derivation(key, 0) {
                let stream = streams.len();
                streams.push((key, 0));
                merge.push(HeapEntry { edge: stream, ranks: Vec::new(), deriv: d });
            }
        }
    }
    let mut out: Vec<Derivation> = Vec::new();
    while out.len() < k {
        let Some(top) = merge.pop() else { break };
        out.push((*top.deriv).clone());
        let (key, rank) = streams[top.edge];
        streams[top.edge].1 = rank + 1;
        if let Some(d) = extractor.derivation(key, rank + 1) {
            merge.push(HeapEntry { edge: top.edge, ranks: Vec::new(), deriv: d });
        }
    }
    // The lazy expansion pops in non-increasing probability order; inside an
    // equal-probability plateau arrival order follows the expansion, so
    // impose the canonical (probability, text) order on the final list.
    out.sort_by(|a, b| {
        b.probability.total_cmp(&a.probability).then_with(|| a.text.cmp(&b.text))
    });
    out
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub chart_items: usize,
    pub chart_edges: usize,
    pub pruned_items: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct ParseResult {
    pub best_tree: Option<Tree>,
    /// Summed probability of the k-best derivations decompiling to best_tree.
    pub best_tree_prob: f64,
    pub kbest: Vec<Derivation>,
    pub diagnostics: Diagnostics,
}

/// Group sorted derivations by the tree they decompile to, sum each group's
/// probabilities in list order, and pick the heaviest tree; ties go to the
/// lexicographically smaller bracketed text.
pub fn most_probable_parse(
    derivations: Vec<Derivation>,
    grammar: &CompiledGrammar,
    injected: &[Fragment],
) -> (Option<Tree>, f64) {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Tree, f64)> = HashMap::new();
    for d in &derivations {
        let tree = grammar
            .decompile_with(&d.fragments, injected)
            .expect("extracted derivations replay");
        let text = write_bracketed(&tree);
        match groups.get_mut(&text) {
            Some((_, mass)) => *mass += d.probability,
            None => {
                order.push(text.clone());
                groups.insert(text, (tree, d.probability));
            }
        }
    }
    let mut best: Option<(String, Tree, f64)> = None;
    for text in order {
        let (tree, mass) = groups.remove(&text).expect("grouped");
        let better = match &best {
            None => true,
            Some((btext, _, bmass)) => {
                mass > *bmass || (mass == *bmass && text < *btext)
            }
        };
        if better {
            best = Some((text, tree, mass));
        }
    }
    match best {
        Some((_, tree, mass)) => (Some(tree), mass),
        None => (None, 0.0),
    }
}

/// Parse one sentence end to end: chart, k-best, MPP.
pub fn parse_sentence(
    words: &[String],
    grammar: &CompiledGrammar,
    model: &ProbabilityModel,
    config: &ParserConfig,
) -> ParseResult {
    let started = Instant::now();
    let chart = build_chart(words, grammar, model, config.beam);
    let derivations = kbest(&chart, grammar, config.k);
    let (best_tree, best_tree_prob) =
        most_probable_parse(derivations.clone(), grammar, &chart.injected);
    ParseResult {
        best_tree,
        best_tree_prob,
        kbest: derivations,
        diagnostics: Diagnostics {
            chart_items: chart.item_count(),
            chart_edges: chart.edge_count(),
            pruned_items: chart.pruned_items,
            elapsed: started.elapsed(),
        },
    }
}

/// One oracle derivation: fragment keys in leftmost order.
#[derive(Debug, Clone)]
pub struct OracleDerivation {
    pub keys: Vec<String>,
    pub probability: f64,
    pub text: String,
}

/// Result of exhaustive fragment-composition enumeration.
#[derive(Debug, Clone)]
pub struct OracleParse {
    /// Every derivation yielding the sentence, sorted like `kbest`.
    pub derivations: Vec<OracleDerivation>,
    pub best_tree: Option<Tree>,
    pub best_tree_prob: f64,
}

/// A realized composition piece: subtree, end word position, derivation
/// keys consumed (leftmost order).
type Realization = (Tree, usize, Vec<String>);

struct Oracle<'a> {
    words: &'a [String],
    by_root: BTreeMap<&'a str, Vec<&'a Fragment>>,
    ceiling: usize,
    count: usize,
    /// Active (label, position) pairs on the current expansion path, with
    /// multiplicity; bounds left recursion (see `realize`).
    in_flight: HashMap<(String, usize), usize>,
}

impl Oracle<'_> {
    fn bump(&mut self, depth: usize) -> Result<(), ParserError> {
        self.count += 1;
        if self.count > self.ceiling || depth > 2_000 {
            return Err(ParserError::OracleInfeasible {
                compositions: self.count,
                ceiling: self.ceiling,
            });
        }
        Ok(())
    }

    /// Every complete fragment composition rooted at `label` whose yield
    /// starts at word position `pos`.
    fn realize(&mut self, label: &str, pos: usize, depth: usize) -> Result<Vec<Realization>, ParserError> {
        self.bump(depth)?;
        // Left-recursion bound. Revisiting the same (label, pos) on one
        // leftmost expansion path is only completable if every revisit
        // brought along at least one extra frontier sibling (pure unary
        // cycles were rejected before the search), and each sibling must
        // consume at least one of the words remaining after `pos`. Deeper
        // revisits can never complete, so pruning them loses nothing.
        let key = (label.to_string(), pos);
        let visits = self.in_flight.get(&key).copied().unwrap_or(0);
        if visits > self.words.len() - pos + 1 {
            return Ok(Vec::new());
        }
        *self.in_flight.entry(key.clone()).or_insert(0) += 1;
        let result = self.realize_candidates(label, pos, depth);
        *self.in_flight.get_mut(&key).expect("pushed above") -= 1;
        result
    }

    fn realize_candidates(
        &mut self,
        label: &str,
        pos: usize,
        depth: usize,
    ) -> Result<Vec<Realization>, ParserError> {
        let mut out = Vec::new();
        let Some(candidates) = self.by_root.get(label) else { return Ok(out) };
        for fragment in candidates.clone() {
            for (tree, end, mut keys) in self.match_shape(fragment.shape(), pos, depth + 1)? {
                keys.insert(0, fragment.key().to_string());
                out.push((tree, end, keys));
            }
        }
        Ok(out)
    }

    /// Match a fragment shape against the sentence from `pos`: frontier
    /// words must equal the sentence words, substitution sites expand
    /// recursively; realizations concatenate left to right.
    fn match_shape(&mut self, shape: &Tree, pos: usize, depth: usize) -> Result<Vec<Realization>, ParserError> {
        match shape {
            Tree::Leaf { word } => {
                Ok(if self.words.get(pos).map(String::as_str) == Some(word.as_str()) {
                    vec![(Tree::leaf(word.clone()), pos + 1, Vec::new())]
                } else {
                    Vec::new()
                })
            }
            Tree::Node { label, children } if children.is_empty() => {
                self.realize(label, pos, depth)
            }
            Tree::Node { label, children } => {
                let mut partials: Vec<(Vec<Tree>, usize, Vec<String>)> =
                    vec![(Vec::new(), pos, Vec::new())];
                for child in children {
                    let mut next = Vec::new();
                    for (trees, p, keys) in &partials {
                        for (tree, end, sub) in self.match_shape(child, *p, depth)? {
                            let mut trees = trees.clone();
                            trees.push(tree);
                            let mut keys = keys.clone();
                            keys.extend(sub);
                            next.push((trees, end, keys));
                        }
                    }
                    partials = next;
                    if partials.is_empty() {
                        break;
                    }
                }
                Ok(partials
                    .into_iter()
                    .map(|(trees, end, keys)| {
                        (Tree::Node { label: label.clone(), children: trees }, end, keys)
                    })
                    .collect())
            }
        }
    }
}

/// Fragments whose frontier is exactly one substitution site (no words) act
/// as same-span unary rewrites. A cycle among them composes with itself, so
/// the sentence would have infinitely many derivations and exhaustive
/// enumeration is impossible.
fn has_unary_fragment_cycle(table: &FragmentTable) -> bool {
    fn frontier<'a>(shape: &'a Tree, words: &mut usize, sites: &mut Vec<&'a str>) {
        match shape {
            Tree::Leaf { .. } => *words += 1,
            Tree::Node { label, children } if children.is_empty() => sites.push(label),
            Tree::Node { children, .. } => {
                for c in children {
                    frontier(c, words, sites);
                }
            }
        }
    }
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (_, entry) in table.iter() {
        let mut words = 0;
        let mut sites = Vec::new();
        frontier(entry.fragment.shape(), &mut words, &mut sites);
        if words == 0 && sites.len() == 1 {
            edges.entry(entry.fragment.root_label()).or_default().insert(sites[0]);
        }
    }
    fn visit<'a>(
        node: &'a str,
        edges: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        on_path: &mut BTreeSet<&'a str>,
        done: &mut BTreeSet<&'a str>,
    ) -> bool {
        if done.contains(node) {
            return false;
        }
        if !on_path.insert(node) {
            return true;
        }
        let cyclic = edges
            .get(node)
            .is_some_and(|next| next.iter().any(|n| visit(n, edges, on_path, done)));
        on_path.remove(node);
        done.insert(node);
        cyclic
    }
    let mut done = BTreeSet::new();
    edges.keys().any(|n| visit(n, &edges, &mut BTreeSet::new(), &mut done))
}

/// Enumerate ALL leftmost fragment compositions yielding the sentence by
/// top-down expansion over the raw fragment table — independent of the
/// compiled grammar and the chart — and select the most probable parse with
/// the same grouping, summation order, and tie-break as
/// `most_probable_parse`.
pub fn brute_force_mpp(
    words: &[String],
    table: &FragmentTable,
    model: &ProbabilityModel,
    ceiling: usize,
) -> Result<OracleParse, ParserError> {
    if has_unary_fragment_cycle(table) {
        return Err(ParserError::OracleUnaryCycle);
    }
    let mut by_root: BTreeMap<&str, Vec<&Fragment>> = BTreeMap::new();
    for (_, entry) in table.iter() {
        by_root.entry(entry.fragment.root_label()).or_default().push(&entry.fragment);
    }
    let mut oracle = Oracle { words, by_root, ceiling, count: 0, in_flight: HashMap::new() };

    let mut derivations: Vec<OracleDerivation> = Vec::new();
    let mut trees: Vec<(String, Tree)> = Vec::new();
    for start in &table.start_labels {
        for (tree, end, keys) in oracle.realize(start, 0, 0)? {
            if end != words.len() {
                continue;
            }
            let probability = keys.iter().fold(1.0_f64, |acc, k| acc * model.prob(k));
            let text = keys.join(" ");
            trees.push((text.clone(), tree));
            derivations.push(OracleDerivation { keys, probability, text });
        }
    }
    let mut by_text: HashMap<String, Tree> = HashMap::new();
    for (text, tree) in trees {
        by_text.insert(text, tree);
    }
    derivations.sort_by(|a, b| {
        b.probability.total_cmp(&a.probability).then_with(|| a.text.cmp(&b.text))
    });

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Tree, f64)> = HashMap::new();
    for d in &derivations {
        let tree = by_text.get(&d.text).expect("every derivation has its tree");
        let tree_text = write_bracketed(tree);
        match groups.get_mut(&tree_text) {
            Some((_, mass)) => *mass += d.probability,
            None => {
                order.push(tree_text.clone());
                groups.insert(tree_text, (tree.clone(), d.probability));
            }
        }
    }
    let mut best: Option<(String, Tree, f64)> = None;
    for text in order {
        let (tree, mass) = groups.remove(&text).expect("grouped");
        let better = match &best {
            None => true,
            Some((btext, _, bmass)) => mass > *bmass || (mass == *bmass && text < *btext),
        };
        if better {
            best = Some((text, tree, mass));
        }
    }
    let (best_tree, best_tree_prob) = match best {
        Some((_, tree, mass)) => (Some(tree), mass),
        None => (None, 0.0),
    };
    Ok(OracleParse { derivations, best_tree, best_tree_prob })
}
