//! Probability estimation over a fragment table: relative frequencies,
//! optional simple Good-Turing smoothing per root label, label priors, and
//! the rare-word model for unknown tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use crate::fragments::{Fragment, FragmentError, FragmentTable};
use crate::treebank::{parse_fragment_text, Corpus, Tree, TreebankError};

/// Compensated (Kahan) summation; used wherever per-root or per-label mass
/// is checked against 1.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub fragment: Fragment,
    pub prob: f64,
}

/// How fragment probabilities were produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Smoothing {
    None,
    /// Simple Good-Turing; `fallback_roots` lists roots whose
    /// frequency-of-frequencies were too degenerate to smooth and kept their
    /// relative-frequency estimates.
    GoodTuring { fallback_roots: Vec<String> },
}

#[derive(Debug, Clone)]
pub struct ProbabilityModel {
    entries: BTreeMap<String, ModelEntry>,
    label_priors: BTreeMap<String, f64>,
    pub smoothing: Smoothing,
    pub unknown: Option<UnknownWordModel>,
    pub start_labels: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot estimate a model from an empty fragment table")]
    EmptyTable,
    #[error("rare_threshold must be at least 1")]
    InvalidThreshold,
    #[error(
        "no token occurs {0} times or fewer, so there is nothing to train the \
         unknown-word model on; raise rare_threshold"
    )]
    NoRareTokens(u64),
    #[error("{source_name}:{line}: {msg}")]
    ParseModel {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Fragments(#[from] FragmentError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error("failed to access {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

impl ProbabilityModel {
    /// Probability of the fragment with this canonical key, 0 if absent.
    pub fn prob(&self, key: &str) -> f64 {
        self.entries.get(key).map_or(0.0, |e| e.prob)
    }

    pub fn get(&self, key: &str) -> Option<&ModelEntry> {
        self.entries.get(key)
    }

    /// Entries in canonical-key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &ModelEntry)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Relative frequency of `label` among nonterminal node occurrences in
    /// training; 0 for unseen labels.
    pub fn label_prior(&self, label: &str) -> f64 {
        self.label_priors.get(label).copied().unwrap_or(0.0)
    }

    pub fn label_priors(&self) -> &BTreeMap<String, f64> {
        &self.label_priors
    }

    /// Terminal words known to the fragment set.
    pub fn lexicon(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.entries.values() {
            for w in e.fragment.shape().yield_words() {
                out.insert(w.to_string());
            }
        }
        out
    }

    /// All nonterminal labels in fragment shapes.
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
}

/// Relative-frequency estimation: `P(t) = count(t) / total occurrences of
/// fragments sharing t's root`. Label priors come from the depth-1 records,
/// whose counts equal nonterminal node occurrences in training (depth-1
/// extraction is always exhaustive); a table with no depth-1 records falls
/// back to root-total proportions.
pub fn estimate(table: &FragmentTable) -> Result<ProbabilityModel, ModelError> {
    if table.is_empty() {
        return Err(ModelError::EmptyTable);
    }
    let mut entries = BTreeMap::new();
    for (key, entry) in table.iter() {
        let total = table.root_total(entry.fragment.root_label());
        debug_assert!(total > 0);
        entries.insert(
            key.to_string(),
            ModelEntry {
                fragment: entry.fragment.clone(),
                prob: entry.count as f64 / total as f64,
            },
        );
    }

    let mut label_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut depth1_total = 0u64;
    for (_, entry) in table.iter() {
        if entry.fragment.depth() == 1 {
            *label_counts.entry(entry.fragment.root_label().to_string()).or_insert(0) +=
                entry.count;
            depth1_total += entry.count;
        }
    }
    if depth1_total == 0 {
        label_counts = table.root_totals().clone();
        depth1_total = label_counts.values().sum();
    }
    let label_priors: BTreeMap<String, f64> = label_counts
        .into_iter()
        .map(|(label, c)| (label, c as f64 / depth1_total as f64))
        .collect();

    Ok(ProbabilityModel {
        entries,
        label_priors,
        smoothing: Smoothing::None,
        unknown: None,
        start_labels: table.start_labels.clone(),
    })
}

/// One root's simple Good-Turing adjusted counts, or `None` when the
/// frequency-of-frequencies are too degenerate (no singletons, a single
/// distinct count, a regression slope that is not below -1, or adjusted
/// counts that fail to stay strictly increasing in the raw count).
fn good_turing_adjusted(freq_of_freq: &BTreeMap<u64, u64>) -> Option<BTreeMap<u64, f64>> {
    let n1 = freq_of_freq.get(&1).copied().unwrap_or(0);
    if n1 == 0 || freq_of_freq.len() < 2 {
        return None;
    }
    let rs: Vec<u64> = freq_of_freq.keys().copied().collect();
    let ns: Vec<u64> = freq_of_freq.values().copied().collect();

    // Averaged counts Z_r = N_r / (0.5 (t - q)) with q, t the neighboring
    // observed frequencies (q = 0 at the low end, t = 2r - q at the high end).
    let mut log_r = Vec::with_capacity(rs.len());
    let mut log_z = Vec::with_capacity(rs.len());
    for j in 0..rs.len() {
        let q = if j == 0 { 0 } else { rs[j - 1] };
        let t = if j + 1 < rs.len() { rs[j + 1] } else { 2 * rs[j] - q };
        let z = ns[j] as f64 / (0.5 * (t - q) as f64);
        log_r.push((rs[j] as f64).ln());
        log_z.push(z.ln());
    }
    let n = log_r.len() as f64;
    let mean_x = log_r.iter().sum::<f64>() / n;
    let mean_y = log_z.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in log_r.iter().zip(&log_z) {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    if slope >= -1.0 {
        return None;
    }
    let s = |r: f64| (intercept + slope * r.ln()).exp();

    // Turing estimates where they differ significantly from the smoothed
    // line, then the smoothed line from the crossover on.
    let mut adjusted = BTreeMap::new();
    let mut use_smoothed = false;
    for (j, &r) in rs.iter().enumerate() {
        let rf = r as f64;
        let lgt = (rf + 1.0) * s(rf + 1.0) / s(rf);
        let next_n = if j + 1 < rs.len() && rs[j + 1] == r + 1 { ns[j + 1] } else { 0 };
        let star = if use_smoothed || next_n == 0 {
            use_smoothed = true;
            lgt
        } else {
            let turing = (rf + 1.0) * next_n as f64 / ns[j] as f64;
            let var = (rf + 1.0) * (rf + 1.0) * (next_n as f64 / (ns[j] as f64 * ns[j] as f64))
                * (1.0 + next_n as f64 / ns[j] as f64);
            if (turing - lgt).abs() <= 1.96 * var.sqrt() {
                use_smoothed = true;
                lgt
            } else {
                turing
            }
        };
        adjusted.insert(r, star);
    }

    // Smoothing must never reorder fragments with different raw counts.
    let mut prev = f64::NEG_INFINITY;
    for &v in adjusted.values() {
        if v <= prev || !v.is_finite() || v <= 0.0 {
            return None;
        }
        prev = v;
    }
    Some(adjusted)
}

/// Replace each root's probabilities with simple Good-Turing estimates
/// renormalized so the seen mass is `1 - N1/N` (N1 singleton types, N total
/// occurrences for that root). Roots with degenerate frequency-of-frequencies
/// keep their relative-frequency estimates and are recorded.
pub fn smooth_good_turing(model: &ProbabilityModel, table: &FragmentTable) -> ProbabilityModel {
    let mut by_root: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
    for (key, entry) in table.iter() {
        by_root.entry(entry.fragment.root_label()).or_default().push((key, entry.count));
    }

    let mut out = model.clone();
    let mut fallback_roots = Vec::new();
    for (root, members) in by_root {
        let mut freq_of_freq: BTreeMap<u64, u64> = BTreeMap::new();
        for (_, c) in &members {
            *freq_of_freq.entry(*c).or_insert(0) += 1;
        }
        let n: u64 = members.iter().map(|(_, c)| *c).sum();
        let n1 = freq_of_freq.get(&1).copied().unwrap_or(0);
        let Some(adjusted) = good_turing_adjusted(&freq_of_freq) else {
            fallback_roots.push(root.to_string());
            continue;
        };
        let seen_mass = 1.0 - n1 as f64 / n as f64;
        let z = kahan_sum(members.iter().map(|(_, c)| adjusted[c]));
        for (key, c) in &members {
            let p = seen_mass * adjusted[c] / z;
            out.entries.get_mut(*key).expect("model covers table").prob = p;
        }
    }
    out.smoothing = Smoothing::GoodTuring { fallback_roots };
    out
}

/// Feature bundle for rare/unknown words. The suffix is lowercased and the
/// capitalization flag is neutralized sentence-initially unless the word was
/// also seen capitalized elsewhere (training) or carries hyphen/digit cues.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureBundle {
    pub suffix: String,
    pub capitalized: bool,
    pub has_hyphen: bool,
    pub has_digit: bool,
}

impl FeatureBundle {
    fn encode(&self) -> String {
        format!(
            "{}{}{}:{}",
            u8::from(self.capitalized),
            u8::from(self.has_hyphen),
            u8::from(self.has_digit),
            self.suffix
        )
    }

    fn decode(text: &str) -> Option<FeatureBundle> {
        let (flags, suffix) = text.split_at(text.find(':')?);
        let mut bits = flags.bytes();
        let (c, h, d) = (bits.next()?, bits.next()?, bits.next()?);
        Some(FeatureBundle {
            suffix: suffix[1..].to_string(),
            capitalized: c == b'1',
            has_hyphen: h == b'1',
            has_digit: d == b'1',
        })
    }
}

fn suffix_of(word: &str, len: usize) -> String {
    let lower = word.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let start = chars.len().saturating_sub(len);
    chars[start..].iter().collect()
}

fn word_flags(word: &str) -> (bool, bool, bool) {
    let capitalized = word.chars().next().is_some_and(char::is_uppercase);
    let has_hyphen = word.contains('-');
    let has_digit = word.chars().any(|c| c.is_ascii_digit());
    (capitalized, has_hyphen, has_digit)
}

/// Bundles for one word occurrence, longest suffix first (lengths 3, 2, 1, 0,
/// deduplicated for short words).
pub fn feature_bundles(word: &str, sentence_initial: bool, capitalized_elsewhere: bool) -> Vec<FeatureBundle> {
    let (cap, hyphen, digit) = word_flags(word);
    let cap = cap && (!sentence_initial || capitalized_elsewhere || hyphen || digit);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for len in (0..=3usize).rev() {
        let suffix = suffix_of(word, len);
        if seen.insert(suffix.clone()) {
            out.push(FeatureBundle { suffix, capitalized: cap, has_hyphen: hyphen, has_digit: digit });
        }
    }
    out
}

/// Tag distributions conditioned on rare-word feature bundles, with add-one
/// smoothing over the full preterminal set.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownWordModel {
    tags: BTreeSet<String>,
    dists: BTreeMap<FeatureBundle, BTreeMap<String, f64>>,
}

impl UnknownWordModel {
    pub fn tags(&self) -> &BTreeSet<String> {
        &self.tags
    }

    /// P(tag | word's features): the longest trained suffix bundle wins;
    /// words matching no trained bundle get the uniform distribution.
    pub fn tag_distribution(&self, word: &str, sentence_initial: bool) -> BTreeMap<String, f64> {
        for bundle in feature_bundles(word, sentence_initial, false) {
            if let Some(dist) = self.dists.get(&bundle) {
                return dist.clone();
            }
        }
        let uniform = 1.0 / self.tags.len() as f64;
        self.tags.iter().map(|t| (t.clone(), uniform)).collect()
    }
}

/// Estimate the unknown-word model from tokens occurring at most
/// `rare_threshold` times.
pub fn train_unknown(corpus: &Corpus, rare_threshold: u64) -> Result<UnknownWordModel, ModelError> {
    if rare_threshold == 0 {
        return Err(ModelError::InvalidThreshold);
    }
    let mut freq: HashMap<&str, u64> = HashMap::new();
    let mut capitalized_elsewhere: HashSet<&str> = HashSet::new();
    let mut tags: BTreeSet<String> = BTreeSet::new();
    for tree in &corpus.trees {
        for (i, word) in tree.yield_words().into_iter().enumerate() {
            *freq.entry(word).or_insert(0) += 1;
            if i > 0 && word.chars().next().is_some_and(char::is_uppercase) {
                capitalized_elsewhere.insert(word);
            }
        }
        for node in tree.internal_nodes() {
            if node.is_preterminal() {
                tags.insert(node.label().to_string());
            }
        }
    }

    let mut counts: BTreeMap<FeatureBundle, BTreeMap<String, u64>> = BTreeMap::new();
    let mut rare_seen = false;
    for tree in &corpus.trees {
        let mut position = 0usize;
        collect_rare(
            tree,
            &mut position,
            &freq,
            rare_threshold,
            &capitalized_elsewhere,
            &mut counts,
            &mut rare_seen,
        );
    }
    if !rare_seen {
        return Err(ModelError::NoRareTokens(rare_threshold));
    }

    let tag_count = tags.len() as f64;
    let mut dists = BTreeMap::new();
    for (bundle, tag_counts) in counts {
        let total: u64 = tag_counts.values().sum();
        let denom = total as f64 + tag_count;
        let dist: BTreeMap<String, f64> = tags
            .iter()
            .map(|t| {
                let c = tag_counts.get(t).copied().unwrap_or(0);
                (t.clone(), (c as f64 + 1.0) / denom)
            })
            .collect();
        dists.insert(bundle, dist);
    }
    Ok(UnknownWordModel { tags, dists })
}

fn collect_rare(
    node: &Tree,
    position: &mut usize,
    freq: &HashMap<&str, u64>,
    rare_threshold: u64,
    capitalized_elsewhere: &HashSet<&str>,
    counts: &mut BTreeMap<FeatureBundle, BTreeMap<String, u64>>,
    rare_seen: &mut bool,
) {
    match node {
        Tree::Leaf { .. } => *position += 1,
        Tree::Node { label, children } => {
            if node.is_preterminal() {
                for child in children {
                    let Tree::Leaf { word } = child else { unreachable!() };
                    if freq[word.as_str()] <= rare_threshold {
                        *rare_seen = true;
                        let initial = *position == 0;
                        let elsewhere = capitalized_elsewhere.contains(word.as_str());
                        for bundle in feature_bundles(word, initial, elsewhere) {
                            *counts
                                .entry(bundle)
                                .or_default()
                                .entry(label.clone())
                                .or_insert(0) += 1;
                        }
                    }
                    *position += 1;
                }
            } else {
                for child in children {
                    collect_rare(
                        child,
                        position,
                        freq,
                        rare_threshold,
                        capitalized_elsewhere,
                        counts,
                        rare_seen,
                    );
                }
            }
        }
    }
}

/// Depth-1 fragments `(TAG word)` for an out-of-lexicon word, weighted by
/// `P(tag | features)`; weights sum to 1.
pub fn unknown_word_fragments(
    word: &str,
    sentence_initial: bool,
    model: &UnknownWordModel,
) -> Vec<(Fragment, f64)> {
    model
        .tag_distribution(word, sentence_initial)
        .into_iter()
        .map(|(tag, p)| {
            (Fragment::new(Tree::node(tag, vec![Tree::leaf(word.to_string())])), p)
        })
        .collect()
}

/// Render the model file: `#`-headers (labels, priors, smoothing, start
/// symbols, unknown-word records), then `prob TAB canonical_key` fragment
/// records; every group is sorted for diff stability.
pub fn render_model(model: &ProbabilityModel) -> Result<String, ModelError> {
    let labels = model.labels();
    for word in model.lexicon() {
        if labels.contains(&word) {
            return Err(ModelError::Fragments(FragmentError::AmbiguousVocabulary { word }));
        }
    }
    let mut out = String::new();
    let label_list: Vec<&str> = labels.iter().map(String::as_str).collect();
    out.push_str(&format!("#labels\t{}\n", label_list.join(" ")));
    for (label, p) in &model.label_priors {
        out.push_str(&format!("#prior\t{label}\t{p}\n"));
    }
    match &model.smoothing {
        Smoothing::None => out.push_str("#smoothing\tnone\n"),
        Smoothing::GoodTuring { fallback_roots } => {
            out.push_str("#smoothing\tgood_turing\n");
            for root in fallback_roots {
                out.push_str(&format!("#smoothing_fallback\t{root}\n"));
            }
        }
    }
    for s in &model.start_labels {
        out.push_str(&format!("#start\t{s}\n"));
    }
    if let Some(unk) = &model.unknown {
        for (bundle, dist) in &unk.dists {
            for (tag, p) in dist {
                out.push_str(&format!("#unk\t{}\t{tag}\t{p}\n", bundle.encode()));
            }
        }
    }
    for (key, entry) in &model.entries {
        out.push_str(&format!("{}\t{key}\n", entry.prob));
    }
    Ok(out)
}

pub fn write_model(model: &ProbabilityModel, path: &Path) -> Result<(), ModelError> {
    let text = render_model(model)?;
    std::fs::write(path, text).map_err(|err| ModelError::Io {
        path: path.display().to_string(),
        err,
    })
}

pub fn parse_model(text: &str, source_name: &str) -> Result<ProbabilityModel, ModelError> {
    let mut labels: BTreeSet<String> = BTreeSet::new();
    let mut entries = BTreeMap::new();
    let mut label_priors = BTreeMap::new();
    let mut smoothing = Smoothing::None;
    let mut start_labels = BTreeSet::new();
    let mut unk_tags: BTreeSet<String> = BTreeSet::new();
    let mut unk_dists: BTreeMap<FeatureBundle, BTreeMap<String, f64>> = BTreeMap::new();
    let fail = |line: usize, msg: String| ModelError::ParseModel {
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
            let fields: Vec<&str> = header.split('\t').collect();
            match fields.as_slice() {
                ["labels", list] => labels.extend(list.split_whitespace().map(str::to_string)),
                ["prior", label, p] => {
                    let p: f64 = p
                        .parse()
                        .map_err(|_| fail(line_no, format!("bad prior `{p}`")))?;
                    label_priors.insert(label.to_string(), p);
                }
                ["smoothing", "none"] => smoothing = Smoothing::None,
                ["smoothing", "good_turing"] => {
                    if !matches!(smoothing, Smoothing::GoodTuring { .. }) {
                        smoothing = Smoothing::GoodTuring { fallback_roots: Vec::new() };
                    }
                }
                ["smoothing_fallback", root] => {
                    if let Smoothing::GoodTuring { fallback_roots } = &mut smoothing {
                        fallback_roots.push(root.to_string());
                    } else {
                        return Err(fail(
                            line_no,
                            "#smoothing_fallback before #smoothing good_turing".to_string(),
                        ));
                    }
                }
                ["start", label] => {
                    start_labels.insert(label.to_string());
                }
                ["unk", bundle, tag, p] => {
                    let bundle = FeatureBundle::decode(bundle)
                        .ok_or_else(|| fail(line_no, format!("bad feature bundle `{bundle}`")))?;
                    let p: f64 = p
                        .parse()
                        .map_err(|_| fail(line_no, format!("bad probability `{p}`")))?;
                    unk_tags.insert(tag.to_string());
                    unk_dists.entry(bundle).or_default().insert(tag.to_string(), p);
                }
                _ => return Err(fail(line_no, format!("unrecognized header line `{raw}`"))),
            }
            continue;
        }
        let (p_text, key) = raw
            .split_once('\t')
            .ok_or_else(|| fail(line_no, "expected `prob TAB key`".to_string()))?;
        let prob: f64 = p_text
            .parse()
            .map_err(|_| fail(line_no, format!("bad probability `{p_text}`")))?;
        let shape = parse_fragment_text(key, &labels, source_name)?;
        entries.insert(key.to_string(), ModelEntry { fragment: Fragment::new(shape), prob });
    }

    if entries.is_empty() {
        return Err(ModelError::EmptyTable);
    }
    let unknown = if unk_dists.is_empty() {
        None
    } else {
        Some(UnknownWordModel { tags: unk_tags, dists: unk_dists })
    };
    Ok(ProbabilityModel { entries, label_priors, smoothing, unknown, start_labels })
}

pub fn load_model(path: &Path) -> Result<ProbabilityModel, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|err| ModelError::Io {
        path: path.display().to_string(),
        err,
    })?;
    parse_model(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::{collect, enumerate_fragments, Bound, RestrictionConfig};
    use crate::heads::HeadTable;
    use crate::treebank::parse_bracketed;

    fn two_tree_table() -> FragmentTable {
        let corpus = parse_bracketed(
            "(S (NP john) (VP (V likes) (NP mary))) (S (NP peter) (VP (V hates) (NP susan)))",
            "toy",
        )
        .unwrap();
        let mut all = Vec::new();
        for tree in &corpus.trees {
            all.extend(enumerate_fragments(tree, Bound::Unlimited, 1 << 20).unwrap());
        }
        let heads = HeadTable::parse("", "empty").unwrap();
        let mut table = collect(all, &RestrictionConfig::default(), &heads);
        table.start_labels.insert("S".to_string());
        table
    }

    #[test]
    fn relative_frequency_examples() {
        let table = two_tree_table();
        let model = estimate(&table).unwrap();
        assert_eq!(model.prob("(S NP VP)"), 0.1); // count 2 over root total 20
        assert_eq!(model.prob("(NP john)"), 0.25);
        assert_eq!(model.prob("(V likes)"), 0.5);
    }

    #[test]
    fn single_fragment_root_gets_probability_one() {
        let corpus = parse_bracketed("(S (A a) (B b))", "toy").unwrap();
        let frags = enumerate_fragments(&corpus.trees[0], Bound::Unlimited, 1 << 20).unwrap();
        let heads = HeadTable::parse("", "empty").unwrap();
        let table = collect(frags, &RestrictionConfig::default(), &heads);
        let model = estimate(&table).unwrap();
        assert_eq!(model.prob("(A a)"), 1.0);
        assert_eq!(model.prob("(S A B)"), 0.25);
    }

    #[test]
    fn per_root_mass_sums_to_one() {
        let table = two_tree_table();
        let model = estimate(&table).unwrap();
        for root in ["S", "NP", "VP", "V"] {
            let sum = kahan_sum(
                model
                    .iter()
                    .filter(|(_, e)| e.fragment.root_label() == root)
                    .map(|(_, e)| e.prob),
            );
            assert!((sum - 1.0).abs() < 1e-12, "root {root} sums to {sum}");
        }
    }

    #[test]
    fn label_priors_are_node_frequencies() {
        let table = two_tree_table();
        let model = estimate(&table).unwrap();
        // Node occurrences over both trees: S 2, NP 4, VP 2, V 2 of 10.
        assert_eq!(model.label_prior("S"), 0.2);
        assert_eq!(model.label_prior("NP"), 0.4);
        assert_eq!(model.label_prior("VP"), 0.2);
        assert_eq!(model.label_prior("V"), 0.2);
        assert_eq!(model.label_prior("X"), 0.0);
        let total = kahan_sum(model.label_priors().values().copied());
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn good_turing_seen_mass_matches_formula() {
        let table = two_tree_table();
        // Oracle recount of the root-S frequency-of-frequencies: 10 shapes
        // per tree, the 2 unlexicalized ones shared (count 2), 16 singletons.
        let mut n = 0u64;
        let mut n1 = 0u64;
        for (_, e) in table.iter() {
            if e.fragment.root_label() == "S" {
                n += e.count;
                if e.count == 1 {
                    n1 += 1;
                }
            }
        }
        assert_eq!(n, 20);
        assert_eq!(n1, 16);

        let model = estimate(&table).unwrap();
        let smoothed = smooth_good_turing(&model, &table);
        match &smoothed.smoothing {
            Smoothing::GoodTuring { fallback_roots } => {
                assert!(!fallback_roots.contains(&"S".to_string()), "root S should smooth");
            }
            other => panic!("expected Good-Turing smoothing, got {other:?}"),
        }
        let seen: f64 = kahan_sum(
            smoothed
                .iter()
                .filter(|(_, e)| e.fragment.root_label() == "S")
                .map(|(_, e)| e.prob),
        );
        let expected = 1.0 - n1 as f64 / n as f64;
        assert!((seen - expected).abs() < 1e-12, "seen mass {seen} vs {expected}");
    }

    #[test]
    fn good_turing_preserves_count_order() {
        let table = two_tree_table();
        let model = estimate(&table).unwrap();
        let smoothed = smooth_good_turing(&model, &table);
        for (k1, e1) in table.iter() {
            for (k2, e2) in table.iter() {
                if e1.fragment.root_label() == e2.fragment.root_label() && e1.count > e2.count {
                    assert!(
                        smoothed.prob(k1) > smoothed.prob(k2),
                        "{k1} (count {}) vs {k2} (count {})",
                        e1.count,
                        e2.count
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_roots_fall_back_unsmoothed() {
        // Every fragment of each root occurs twice: no singletons anywhere.
        let corpus = parse_bracketed("(S (A a) (B b)) (S (A a) (B b))", "toy").unwrap();
        let mut all = Vec::new();
        for tree in &corpus.trees {
            all.extend(enumerate_fragments(tree, Bound::Unlimited, 1 << 20).unwrap());
        }
        let heads = HeadTable::parse("", "empty").unwrap();
        let table = collect(all, &RestrictionConfig::default(), &heads);
        let model = estimate(&table).unwrap();
        let smoothed = smooth_good_turing(&model, &table);
        match &smoothed.smoothing {
            Smoothing::GoodTuring { fallback_roots } => {
                assert!(fallback_roots.contains(&"S".to_string()));
                assert!(fallback_roots.contains(&"A".to_string()));
            }
            other => panic!("expected Good-Turing record, got {other:?}"),
        }
        for (key, _) in smoothed.iter() {
            assert_eq!(smoothed.prob(key), model.prob(key), "{key} changed");
        }
    }

    #[test]
    fn unknown_model_trains_on_rare_words() {
        let corpus = parse_bracketed(
            "(S (NP (DT the) (NN dog)) (VP (VBD barked)))\n\
             (S (NP (DT the) (NN cat)) (VP (VBD meowed)))\n\
             (S (NP (DT the) (NN dog)) (VP (VBD slept)))",
            "toy",
        )
        .unwrap();
        let model = train_unknown(&corpus, 1).unwrap();
        assert!(model.tags().contains("VBD"));
        // 'barked', 'meowed', 'slept' are rare; '-ed' suffixes point at VBD.
        let dist = model.tag_distribution("walked", false);
        let sum = kahan_sum(dist.values().copied());
        assert!((sum - 1.0).abs() < 1e-12);
        let best = dist.iter().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
        assert_eq!(best.0, "VBD");
    }

    #[test]
    fn unknown_fragments_sum_to_one() {
        let corpus = parse_bracketed("(S (NP (NN dog)) (VP (VBD ran)))", "toy").unwrap();
        let model = train_unknown(&corpus, 5).unwrap();
        let frags = unknown_word_fragments("zyzzyx", false, &model);
        assert_eq!(frags.len(), model.tags().len());
        let sum = kahan_sum(frags.iter().map(|(_, p)| *p));
        assert!((sum - 1.0).abs() < 1e-12);
        for (f, _) in &frags {
            assert_eq!(f.depth(), 1);
            assert_eq!(f.frontier_words(), 1);
        }
    }

    #[test]
    fn sentence_initial_capitalization_is_neutralized() {
        let bundles = feature_bundles("Dog", true, false);
        assert!(bundles.iter().all(|b| !b.capitalized));
        let mid = feature_bundles("Dog", false, false);
        assert!(mid.iter().all(|b| b.capitalized));
        let elsewhere = feature_bundles("Dog", true, true);
        assert!(elsewhere.iter().all(|b| b.capitalized));
        // Hyphen/digit cues also keep the flag.
        let cued = feature_bundles("A-1", true, false);
        assert!(cued.iter().all(|b| b.capitalized));
    }

    #[test]
    fn no_rare_tokens_is_an_error() {
        let corpus = parse_bracketed(
            "(S (A x) (B x)) (S (A x) (B x))",
            "toy",
        )
        .unwrap();
        match train_unknown(&corpus, 1) {
            Err(ModelError::NoRareTokens(1)) => {}
            other => panic!("expected NoRareTokens, got {other:?}"),
        }
        assert!(matches!(train_unknown(&corpus, 0), Err(ModelError::InvalidThreshold)));
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let table = two_tree_table();
        let mut model = estimate(&table).unwrap();
        let corpus = parse_bracketed(
            "(S (NP john) (VP (V likes) (NP mary))) (S (NP peter) (VP (V hates) (NP susan)))",
            "toy",
        )
        .unwrap();
        model.unknown = Some(train_unknown(&corpus, 1).unwrap());
        let model = smooth_good_turing(&model, &table);

        let text = render_model(&model).unwrap();
        let reread = parse_model(&text, "round").unwrap();
        assert_eq!(reread.len(), model.len());
        for (key, entry) in model.iter() {
            assert_eq!(reread.prob(key), entry.prob, "prob drifted for {key}");
            assert_eq!(reread.get(key).unwrap().fragment, entry.fragment);
        }
        assert_eq!(reread.label_priors(), model.label_priors());
        assert_eq!(reread.smoothing, model.smoothing);
        assert_eq!(reread.start_labels, model.start_labels);
        assert_eq!(reread.unknown, model.unknown);
        // Byte-stable re-render.
        assert_eq!(render_model(&reread).unwrap(), text);
    }
}
