//! Compilation of a fragment model into an indexed binary grammar for chart
//! parsing, and decompilation of derivations back into trees.
//!
//! Each fragment becomes one flat rule (lhs = root label, rhs = frontier
//! symbols in order), then a left-branching chain of binary rules over
//! fragment-unique intermediate symbols. Exactly one rule per fragment — the
//! completing (topmost) one — carries the fragment's probability; the others
//! carry 1, so the product over a chain is the fragment probability and a
//! derivation of chained rules maps 1:1 onto a leftmost fragment derivation.

use std::collections::HashMap;

use crate::fragments::Fragment;
use crate::model::ProbabilityModel;
use crate::treebank::Tree;

pub type FragmentId = u32;
pub type RuleId = u32;

/// A grammar symbol. Terminal ids index the word alphabet; intermediate ids
/// are fragment-chain symbols that never appear in two different fragments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Nonterminal(u32),
    Terminal(u32),
    Intermediate(u32),
}

/// A binarized rule: rhs has length 1 or 2.
#[derive(Debug, Clone)]
pub struct IndexedRule {
    pub lhs: Symbol,
    pub rhs: Vec<Symbol>,
    /// Fragment probability on the completing rule, 1.0 on chain rules.
    pub probability: f64,
    /// Set on the completing rule only.
    pub fragment: Option<FragmentId>,
}

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("model has no start symbols that occur in the grammar")]
    NoStartSymbols,
    #[error("derivation is empty")]
    EmptyDerivation,
    #[error("fragment id {0} is out of range")]
    UnknownFragmentId(FragmentId),
    #[error("composition mismatch: open site `{expected}` cannot take a fragment rooted at `{found}`")]
    CompositionMismatch { expected: String, found: String },
    #[error("incomplete derivation: site `{0}` is left open")]
    IncompleteDerivation(String),
    #[error("derivation continues past a complete tree ({0} fragments unused)")]
    LeftoverFragments(usize),
}

#[derive(Debug, Clone)]
struct IntermediateInfo {
    fragment: FragmentId,
    /// 1-based position in the fragment's chain, for display.
    position: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledGrammar {
    nonterminals: Vec<String>,
    nt_ids: HashMap<String, u32>,
    terminals: Vec<String>,
    t_ids: HashMap<String, u32>,
    fragments: Vec<Fragment>,
    fragment_probs: Vec<f64>,
    /// Rule ids of each fragment's chain, bottom intermediate first,
    /// completing rule last.
    fragment_rules: Vec<Vec<RuleId>>,
    rules: Vec<IndexedRule>,
    intermediates: Vec<IntermediateInfo>,
    rules_by_left: HashMap<Symbol, Vec<RuleId>>,
    rules_by_unary_child: HashMap<Symbol, Vec<RuleId>>,
    priors: Vec<f64>,
    start_symbols: Vec<Symbol>,
}

/// Compile every fragment in the model. Fragment ids follow canonical-key
/// order, so compilation is deterministic.
pub fn compile(model: &ProbabilityModel) -> Result<CompiledGrammar, GrammarError> {
    let mut g = CompiledGrammar {
        nonterminals: Vec::new(),
        nt_ids: HashMap::new(),
        terminals: Vec::new(),
        t_ids: HashMap::new(),
        fragments: Vec::new(),
        fragment_probs: Vec::new(),
        fragment_rules: Vec::new(),
        rules: Vec::new(),
        intermediates: Vec::new(),
        rules_by_left: HashMap::new(),
        rules_by_unary_child: HashMap::new(),
        priors: Vec::new(),
        start_symbols: Vec::new(),
    };

    for (label, _) in model.label_priors() {
        g.intern_nonterminal(label);
    }

    for (_, entry) in model.iter() {
        let fid = g.fragments.len() as FragmentId;
        let lhs = g.intern_nonterminal(entry.fragment.root_label());
        let rhs: Vec<Symbol> = entry
            .fragment
            .frontier()
            .iter()
            .map(|node| match node {
                Tree::Leaf { word } => g.intern_terminal(word),
                site => g.intern_nonterminal(site.label()),
            })
            .collect();
        debug_assert!(!rhs.is_empty(), "fragment frontier cannot be empty");

        let mut chain = Vec::new();
        if rhs.len() <= 2 {
            chain.push(g.push_rule(IndexedRule {
                lhs,
                rhs,
                probability: entry.prob,
                fragment: Some(fid),
            }));
        } else {
            let mut left = rhs[0];
            for (j, &sym) in rhs[1..rhs.len() - 1].iter().enumerate() {
                let inter = g.new_intermediate(fid, j + 1);
                chain.push(g.push_rule(IndexedRule {
                    lhs: inter,
                    rhs: vec![left, sym],
                    probability: 1.0,
                    fragment: None,
                }));
                left = inter;
            }
            chain.push(g.push_rule(IndexedRule {
                lhs,
                rhs: vec![left, rhs[rhs.len() - 1]],
                probability: entry.prob,
                fragment: Some(fid),
            }));
        }
        g.fragments.push(entry.fragment.clone());
        g.fragment_probs.push(entry.prob);
        g.fragment_rules.push(chain);
    }

    g.priors = g.nonterminals.iter().map(|l| model.label_prior(l)).collect();
    g.start_symbols = model
        .start_labels
        .iter()
        .filter_map(|l| g.nt_ids.get(l).map(|&id| Symbol::Nonterminal(id)))
        .collect();
    if g.start_symbols.is_empty() {
        return Err(GrammarError::NoStartSymbols);
    }
    Ok(g)
}

impl CompiledGrammar {
    fn intern_nonterminal(&mut self, label: &str) -> Symbol {
        if let Some(&id) = self.nt_ids.get(label) {
            return Symbol::Nonterminal(id);
        }
        let id = self.nonterminals.len() as u32;
        self.nonterminals.push(label.to_string());
        self.nt_ids.insert(label.to_string(), id);
        Symbol::Nonterminal(id)
    }

    fn intern_terminal(&mut self, word: &str) -> Symbol {
        if let Some(&id) = self.t_ids.get(word) {
            return Symbol::Terminal(id);
        }
        let id = self.terminals.len() as u32;
        self.terminals.push(word.to_string());
        self.t_ids.insert(word.to_string(), id);
        Symbol::Terminal(id)
    }

    fn new_intermediate(&mut self, fragment: FragmentId, position: usize) -> Symbol {
        let id = self.intermediates.len() as u32;
        self.intermediates.push(IntermediateInfo { fragment, position });
        Symbol::Intermediate(id)
    }

    fn push_rule(&mut self, rule: IndexedRule) -> RuleId {
        let id = self.rules.len() as RuleId;
        match rule.rhs.len() {
            1 => self.rules_by_unary_child.entry(rule.rhs[0]).or_default().push(id),
            2 => self.rules_by_left.entry(rule.rhs[0]).or_default().push(id),
            n => unreachable!("rule with rhs arity {n}"),
        }
        self.rules.push(rule);
        id
    }

    pub fn rules(&self) -> &[IndexedRule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &IndexedRule {
        &self.rules[id as usize]
    }

    pub fn fragment_count(&self) -> usize {
        self.fragments.len()
    }

    pub fn fragment(&self, id: FragmentId) -> &Fragment {
        &self.fragments[id as usize]
    }

    pub fn fragment_prob(&self, id: FragmentId) -> f64 {
        self.fragment_probs[id as usize]
    }

    /// Rule chain of a fragment, completing rule last.
    pub fn fragment_rules(&self, id: FragmentId) -> &[RuleId] {
        &self.fragment_rules[id as usize]
    }

    pub fn lookup_nonterminal(&self, label: &str) -> Option<Symbol> {
        self.nt_ids.get(label).map(|&id| Symbol::Nonterminal(id))
    }

    pub fn lookup_terminal(&self, word: &str) -> Option<Symbol> {
        self.t_ids.get(word).map(|&id| Symbol::Terminal(id))
    }

    pub fn binary_rules_with_left(&self, left: Symbol) -> &[RuleId] {
        self.rules_by_left.get(&left).map_or(&[], Vec::as_slice)
    }

    pub fn unary_rules_with_child(&self, child: Symbol) -> &[RuleId] {
        self.rules_by_unary_child.get(&child).map_or(&[], Vec::as_slice)
    }

    pub fn start_symbols(&self) -> &[Symbol] {
        &self.start_symbols
    }

    /// Label prior used by beam pruning; intermediates inherit their
    /// fragment's lhs prior, terminals are never pruned and report 1.
    pub fn prior(&self, symbol: Symbol) -> f64 {
        match symbol {
            Symbol::Nonterminal(id) => self.priors[id as usize],
            Symbol::Intermediate(id) => {
                let frag = &self.fragments[self.intermediates[id as usize].fragment as usize];
                self.priors[self.nt_ids[frag.root_label()] as usize]
            }
            Symbol::Terminal(_) => 1.0,
        }
    }

    pub fn symbol_name(&self, symbol: Symbol) -> String {
        match symbol {
            Symbol::Nonterminal(id) => self.nonterminals[id as usize].clone(),
            Symbol::Terminal(id) => format!("'{}'", self.terminals[id as usize]),
            Symbol::Intermediate(id) => {
                let info = &self.intermediates[id as usize];
                format!("I({}.{})", info.fragment, info.position)
            }
        }
    }

    /// Debug dump: one rule per line, `lhs -> rhs p=prob @fragment_key`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            let rhs: Vec<String> = rule.rhs.iter().map(|&s| self.symbol_name(s)).collect();
            let tag = match rule.fragment {
                Some(fid) => self.fragments[fid as usize].key().to_string(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{} -> {} p={} @{}\n",
                self.symbol_name(rule.lhs),
                rhs.join(" "),
                rule.probability,
                tag
            ));
        }
        out
    }

    fn fragment_or_injected<'a>(
        &'a self,
        id: FragmentId,
        injected: &'a [Fragment],
    ) -> Result<&'a Fragment, GrammarError> {
        let base = self.fragments.len() as u32;
        if id < base {
            Ok(&self.fragments[id as usize])
        } else {
            injected
                .get((id - base) as usize)
                .ok_or(GrammarError::UnknownFragmentId(id))
        }
    }

    /// Replay a leftmost derivation (sequence of fragment ids) into the tree
    /// it composes. Fails on root-label mismatches, open sites, or leftover
    /// fragments.
    pub fn decompile(&self, derivation: &[FragmentId]) -> Result<Tree, GrammarError> {
        self.decompile_with(derivation, &[])
    }

    /// `decompile` for derivations that also reference per-sentence injected
    /// fragments (ids at and above `fragment_count()` index into `injected`).
    pub fn decompile_with(
        &self,
        derivation: &[FragmentId],
        injected: &[Fragment],
    ) -> Result<Tree, GrammarError> {
        let (tree, _) = self.replay(derivation, injected, 0, &mut Vec::new())?;
        Ok(tree)
    }

    /// Replay a derivation and report every chart item its realization
    /// occupies: the lhs item of each fragment and the intermediate items of
    /// its binarized chain, with word spans.
    pub fn derivation_items(
        &self,
        derivation: &[FragmentId],
        injected: &[Fragment],
    ) -> Result<Vec<(Symbol, usize, usize)>, GrammarError> {
        let mut items = Vec::new();
        self.replay(derivation, injected, 0, &mut items)?;
        Ok(items)
    }

    fn replay(
        &self,
        derivation: &[FragmentId],
        injected: &[Fragment],
        start: usize,
        items: &mut Vec<(Symbol, usize, usize)>,
    ) -> Result<(Tree, usize), GrammarError> {
        let mut cursor = Cursor { ids: derivation, next: 0 };
        let first = cursor.take().ok_or(GrammarError::EmptyDerivation)?;
        let fragment = self.fragment_or_injected(first, injected)?;
        let (tree, width) = self.apply(first, fragment, &mut cursor, injected, start, items)?;
        if cursor.next < derivation.len() {
            return Err(GrammarError::LeftoverFragments(derivation.len() - cursor.next));
        }
        Ok((tree, width))
    }

    fn apply(
        &self,
        id: FragmentId,
        fragment: &Fragment,
        cursor: &mut Cursor,
        injected: &[Fragment],
        start: usize,
        items: &mut Vec<(Symbol, usize, usize)>,
    ) -> Result<(Tree, usize), GrammarError> {
        let mut frontier_widths = Vec::new();
        let (tree, width) =
            self.fill(fragment.shape(), cursor, injected, start, items, &mut frontier_widths)?;
        // Chart items this fragment's chain occupies: intermediates cover the
        // left-branching prefixes, the lhs covers the whole span. Injected
        // fragments are depth-1 unaries and add no intermediates.
        if (id as usize) < self.fragments.len() {
            for (j, rule_id) in self.fragment_rules(id).iter().enumerate() {
                let rule = self.rule(*rule_id);
                if rule.fragment.is_none() {
                    let prefix: usize = frontier_widths[..j + 2].iter().sum();
                    items.push((rule.lhs, start, start + prefix));
                }
            }
        }
        let lhs = self
            .lookup_nonterminal(fragment.root_label())
            .unwrap_or(Symbol::Nonterminal(u32::MAX));
        items.push((lhs, start, start + width));
        Ok((tree, width))
    }

    fn fill(
        &self,
        shape: &Tree,
        cursor: &mut Cursor,
        injected: &[Fragment],
        start: usize,
        items: &mut Vec<(Symbol, usize, usize)>,
        frontier_widths: &mut Vec<usize>,
    ) -> Result<(Tree, usize), GrammarError> {
        match shape {
            Tree::Leaf { word } => {
                frontier_widths.push(1);
                Ok((Tree::leaf(word.clone()), 1))
            }
            Tree::Node { label, children } if children.is_empty() => {
                let Some(id) = cursor.take() else {
                    return Err(GrammarError::IncompleteDerivation(label.clone()));
                };
                let fragment = self.fragment_or_injected(id, injected)?;
                if fragment.root_label() != label {
                    return Err(GrammarError::CompositionMismatch {
                        expected: label.clone(),
                        found: fragment.root_label().to_string(),
                    });
                }
                let (tree, width) = self.apply(id, fragment, cursor, injected, start, items)?;
                frontier_widths.push(width);
                Ok((tree, width))
            }
            Tree::Node { label, children } => {
                let mut built = Vec::with_capacity(children.len());
                let mut offset = start;
                for child in children {
                    let (tree, width) =
                        self.fill(child, cursor, injected, offset, items, frontier_widths)?;
                    built.push(tree);
                    offset += width;
                }
                Ok((Tree::Node { label: label.clone(), children: built }, offset - start))
            }
        }
    }
}

struct Cursor<'a> {
    ids: &'a [FragmentId],
    next: usize,
}

impl Cursor<'_> {
    fn take(&mut self) -> Option<FragmentId> {
        let id = self.ids.get(self.next).copied();
        if id.is_some() {
            self.next += 1;
        }
        id
    }
}
