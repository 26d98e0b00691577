//! Command-line pipeline: train a fragment model from a treebank, parse
//! sentences, score parses, sweep restriction dimensions over a base
//! fragment table, and report table statistics.
//!
//! Exit codes: 0 success, 2 input error, 3 corpus mismatch, 4 resource
//! ceiling exceeded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, RunConfig, SmoothingKind, SweepDimension};
use crate::eval::{bracket_diff, render_report, score, EvalConfig, EvalError};
use crate::fragments::{
    collect, enumerate_fragments, sample_fragments, Bound, Fragment, FragmentError,
    FragmentTable, Provenance,
};
use crate::grammar::{compile, GrammarError};
use crate::heads::{nonheadword_count, HeadError, HeadTable};
use crate::model::{
    estimate, load_model, smooth_good_turing, train_unknown, write_model, ModelError,
    ProbabilityModel, UnknownWordModel,
};
use crate::parser::{parse_sentence, ParseResult, ParserConfig, ParserError};
use crate::treebank::{
    load_corpus, normalize_corpus, parse_bracketed, write_bracketed, Corpus,
    NormalizationConfig, Tree, TreebankError,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Heads(#[from] HeadError),
    #[error(transparent)]
    Fragments(#[from] FragmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Parser(#[from] ParserError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Eval(EvalError::SentenceCountMismatch { .. }) => 3,
            CliError::Fragments(f) | CliError::Model(ModelError::Fragments(f)) => match f {
                FragmentError::Explosion { .. } | FragmentError::SamplingExhausted { .. } => 4,
                _ => 2,
            },
            CliError::Parser(ParserError::OracleInfeasible { .. }) => 4,
            _ => 2,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.display().to_string(), e))
}

fn normalization(config: &RunConfig) -> NormalizationConfig {
    NormalizationConfig {
        punctuation_tags: config.punctuation_tags.clone(),
        ..NormalizationConfig::default()
    }
}

fn load_treebank(path: &Path, config: &RunConfig) -> Result<Corpus, CliError> {
    let corpus = load_corpus(path)?;
    if config.normalize {
        Ok(normalize_corpus(&corpus, &normalization(config))?)
    } else {
        Ok(corpus)
    }
}

fn head_table(config: &RunConfig) -> Result<HeadTable, CliError> {
    match &config.heads {
        Some(path) => Ok(HeadTable::load(path)?),
        None => Ok(HeadTable::wsj_default()),
    }
}

fn eval_config(config: &RunConfig) -> EvalConfig {
    EvalConfig { punctuation_tags: config.punctuation_tags.clone(), cutoffs: config.cutoffs.clone() }
}

/// Sentences from raw token lines (one sentence per line) or, when the file
/// holds bracketed trees, their yields. Empty lines are skipped with a
/// warning.
fn read_sentences(text: &str, source_name: &str) -> Result<Vec<Vec<String>>, CliError> {
    if text.trim_start().starts_with('(') {
        let corpus = parse_bracketed(text, source_name)?;
        Ok(corpus
            .trees
            .iter()
            .map(|t| t.yield_words().iter().map(|w| w.to_string()).collect())
            .collect())
    } else {
        let mut sentences = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if words.is_empty() {
                if !line.trim().is_empty() || !text.trim().is_empty() {
                    eprintln!("warning: {source_name}:{}: empty sentence line skipped", i + 1);
                }
                continue;
            }
            sentences.push(words);
        }
        Ok(sentences)
    }
}

fn run_parallel<T: Send>(
    workers: usize,
    job: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Input(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn parse_all(
    sentences: &[Vec<String>],
    model: &ProbabilityModel,
    config: &RunConfig,
) -> Result<Vec<ParseResult>, CliError> {
    let grammar = compile(model)?;
    let parser_config = ParserConfig { beam: config.beam, k: config.k };
    run_parallel(config.workers, || {
        sentences
            .par_iter()
            .map(|words| parse_sentence(words, &grammar, model, &parser_config))
            .collect()
    })
}

/// One output record per sentence: id, bracketed best tree or `(NOPARSE)`,
/// summed best-tree probability in scientific notation, derivation count.
fn render_records(results: &[ParseResult]) -> String {
    let mut out = String::new();
    for (i, result) in results.iter().enumerate() {
        let tree = result
            .best_tree
            .as_ref()
            .map(write_bracketed)
            .unwrap_or_else(|| "(NOPARSE)".to_string());
        let _ = writeln!(out, "{i}\t{tree}\t{:e}\t{}", result.best_tree_prob, result.kbest.len());
    }
    out
}

fn looks_like_records(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| {
            l.contains('\t') && l.split('\t').next().unwrap().trim().parse::<usize>().is_ok()
        })
}

/// Parse a parser-output file into per-sentence trees (None = NOPARSE).
fn parse_records(text: &str, source_name: &str) -> Result<Vec<Option<Tree>>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(CliError::Input(format!(
                "{source_name}:{}: malformed parser record (expected tab-separated fields)",
                i + 1
            )));
        }
        if fields[1] == "(NOPARSE)" {
            out.push(None);
            continue;
        }
        let corpus = parse_bracketed(fields[1], &format!("{source_name}:{}", i + 1))?;
        if corpus.len() != 1 {
            return Err(CliError::Input(format!(
                "{source_name}:{}: expected exactly one tree per record",
                i + 1
            )));
        }
        out.push(Some(corpus.trees.into_iter().next().unwrap()));
    }
    Ok(out)
}

/// Fixed-order fragment-table statistics: totals, per-depth and per-root
/// occurrence counts, lexicalization split, nonheadword histogram.
pub fn render_table_stats(table: &FragmentTable, heads: &HeadTable) -> String {
    let mut out = String::new();
    let total: u64 = table.root_totals().values().sum();
    let _ = writeln!(out, "total_fragments = {total}");
    let _ = writeln!(out, "distinct_fragments = {}", table.len());
    for (depth, count) in table.depth_histogram() {
        let _ = writeln!(out, "depth {depth} = {count}");
    }
    for (label, count) in table.root_totals() {
        let _ = writeln!(out, "root {label} = {count}");
    }
    let mut lexicalized = 0u64;
    let mut unlexicalized = 0u64;
    let mut nonhead: BTreeMap<usize, u64> = BTreeMap::new();
    for (_, entry) in table.iter() {
        if entry.fragment.frontier_words() > 0 {
            lexicalized += entry.count;
        } else {
            unlexicalized += entry.count;
        }
        *nonhead.entry(nonheadword_count(entry.fragment.shape(), heads)).or_insert(0) +=
            entry.count;
    }
    let _ = writeln!(out, "lexicalized = {lexicalized}");
    let _ = writeln!(out, "unlexicalized = {unlexicalized}");
    for (k, count) in nonhead {
        let _ = writeln!(out, "nonheadwords {k} = {count}");
    }
    out
}

/// Extract fragments, estimate the model, train the unknown-word component,
/// and write the fragment table and model files.
pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    config.restrictions.validate()?;
    let train_path = RunConfig::require(&config.train, "train")?;
    let corpus = load_treebank(train_path, config)?;
    if corpus.is_empty() {
        return Err(CliError::Input(format!(
            "training corpus {} contains no trees",
            train_path.display()
        )));
    }
    let heads = head_table(config)?;

    let mut fragments: Vec<Fragment> = Vec::new();
    if config.exhaustive {
        for (tree, _) in corpus.iter() {
            fragments.extend(enumerate_fragments(
                tree,
                config.restrictions.max_depth,
                config.enumeration_ceiling,
            )?);
        }
    } else {
        for (tree, _) in corpus.iter() {
            fragments.extend(enumerate_fragments(tree, Bound::Finite(1), config.enumeration_ceiling)?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for &(depth, n) in &config.sample_plan {
            fragments.extend(sample_fragments(&corpus, depth, n, &mut rng)?);
        }
    }

    let mut table = collect(fragments, &config.restrictions, &heads);
    table.provenance = if config.exhaustive {
        Provenance::Exhaustive
    } else {
        Provenance::Sampled { per_depth: config.sample_plan.clone() }
    };
    for (tree, _) in corpus.iter() {
        table.start_labels.insert(tree.label().to_string());
    }
    if table.is_empty() {
        return Err(CliError::Input("no fragments survived extraction and filtering".to_string()));
    }

    let mut model = estimate(&table)?;
    if config.smoothing == SmoothingKind::GoodTuring {
        model = smooth_good_turing(&model, &table);
    }
    if config.unknown {
        model.unknown = Some(train_unknown(&corpus, config.rare_threshold)?);
    }

    if let Some(path) = &config.fragments {
        table.write_file(path)?;
    }
    if let Some(path) = &config.model {
        write_model(&model, path)?;
    }
    print!("{}", render_table_stats(&table, &heads));
    Ok(())
}

/// Parse sentences with a trained model; write one record per sentence.
pub fn cmd_parse(config: &RunConfig) -> Result<(), CliError> {
    let model_path = RunConfig::require(&config.model, "model")?;
    let mut model = load_model(model_path)?;
    if !config.unknown {
        model.unknown = None;
    }
    let input_path = config
        .input
        .as_ref()
        .or(config.test.as_ref())
        .ok_or(ConfigError::MissingKey("input"))?;
    let text = read_file(input_path)?;
    let sentences = read_sentences(&text, &input_path.display().to_string())?;

    let started = std::time::Instant::now();
    let results = parse_all(&sentences, &model, config)?;
    let records = render_records(&results);

    match &config.output {
        Some(path) => write_file(path, &records)?,
        None => print!("{records}"),
    }
    let noparse = results.iter().filter(|r| r.best_tree.is_none()).count();
    let items: usize = results.iter().map(|r| r.diagnostics.chart_items).sum();
    let elapsed = started.elapsed().as_secs_f64();
    eprintln!(
        "parsed {} sentences ({} unparsable) in {:.2}s ({:.1} sentences/s, {} chart items)",
        results.len(),
        noparse,
        elapsed,
        results.len() as f64 / elapsed.max(1e-9),
        items
    );
    Ok(())
}

/// Score a test file (parser records or a treebank) against a gold treebank.
pub fn cmd_eval(gold_path: &Path, test_path: &Path, config: &RunConfig) -> Result<(), CliError> {
    let gold = load_treebank(gold_path, config)?;
    let test_text = read_file(test_path)?;
    let test: Vec<Option<Tree>> = if looks_like_records(&test_text) {
        parse_records(&test_text, &test_path.display().to_string())?
    } else {
        let corpus = parse_bracketed(&test_text, &test_path.display().to_string())?;
        let corpus =
            if config.normalize { normalize_corpus(&corpus, &normalization(config))? } else { corpus };
        corpus.trees.into_iter().map(Some).collect()
    };

    let eval_cfg = eval_config(config);
    let report = score(&gold.trees, &test, &eval_cfg)?;
    let mut text = render_report(&report);
    if config.diff {
        let diff = bracket_diff(&gold.trees, &test, &eval_cfg);
        if !diff.is_empty() {
            text.push('\n');
            text.push_str(&diff);
        }
    }
    if let Some(path) = &config.output {
        write_file(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn apply_dimension(
    restrictions: &crate::fragments::RestrictionConfig,
    dimension: SweepDimension,
    value: Bound,
) -> crate::fragments::RestrictionConfig {
    let mut out = restrictions.clone();
    match dimension {
        SweepDimension::Depth => out.max_depth = value,
        SweepDimension::Words => out.max_frontier_words = value,
        SweepDimension::UnlexDepth => out.max_unlexicalized_depth = value,
        SweepDimension::NonHeadWords => out.max_nonheadwords = value,
    }
    out
}

fn hex_digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn sweep_cell(
    table: &FragmentTable,
    heads: &HeadTable,
    dimension: SweepDimension,
    value: Bound,
    sentences: &[Vec<String>],
    input_fingerprint: &str,
    gold: &[Tree],
    base_unknown: &Option<UnknownWordModel>,
    config: &RunConfig,
) -> Result<(f64, f64), CliError> {
    let restrictions = apply_dimension(&config.restrictions, dimension, value);
    restrictions.validate()?;
    let filtered = table.filtered(&restrictions, heads);
    if filtered.is_empty() {
        return Err(CliError::Input("no fragments survive this restriction".to_string()));
    }
    let mut model = estimate(&filtered)?;
    if config.smoothing == SmoothingKind::GoodTuring {
        model = smooth_good_turing(&model, &filtered);
    }
    model.unknown = if config.unknown { base_unknown.clone() } else { None };

    let records = match &config.cache_dir {
        Some(dir) => {
            let key = hex_digest(&[
                &crate::model::render_model(&model)?,
                input_fingerprint,
                &config.k.to_string(),
                &format!("{:e}", config.beam),
            ]);
            let path = dir.join(format!("{key}.records"));
            if path.is_file() {
                read_file(&path)?
            } else {
                let results = parse_all(sentences, &model, config)?;
                let records = render_records(&results);
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Io(dir.display().to_string(), e))?;
                write_file(&path, &records)?;
                records
            }
        }
        None => render_records(&parse_all(sentences, &model, config)?),
    };

    let test = parse_records(&records, "sweep")?;
    let report = score(gold, &test, &eval_config(config))?;
    let block = report.cutoffs.last().ok_or_else(|| {
        CliError::Input("eval produced no cutoff blocks (set `cutoffs`)".to_string())
    })?;
    Ok((block.labeled_precision(), block.labeled_recall()))
}

/// Filter the base fragment table along one restriction dimension, re-score
/// each value, and emit a value/LP/LR table. Per-value failures become
/// error rows; the sweep continues.
pub fn cmd_sweep(config: &RunConfig) -> Result<(), CliError> {
    let table = FragmentTable::load(RunConfig::require(&config.fragments, "fragments")?)?;
    let heads = head_table(config)?;
    let dimension = config.sweep_dimension.ok_or(ConfigError::MissingKey("sweep_dimension"))?;
    if config.sweep_values.is_empty() {
        return Err(ConfigError::MissingKey("sweep_values").into());
    }
    let data_path = config
        .dev
        .as_ref()
        .or(config.test.as_ref())
        .ok_or(ConfigError::MissingKey("dev"))?;
    let gold = load_treebank(data_path, config)?;
    let sentences: Vec<Vec<String>> = gold
        .trees
        .iter()
        .map(|t| t.yield_words().iter().map(|w| w.to_string()).collect())
        .collect();
    let input_fingerprint = hex_digest(
        &gold.trees.iter().map(write_bracketed).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>(),
    );
    let base_unknown = match &config.model {
        Some(path) => load_model(path)?.unknown,
        None => None,
    };

    let mut out = String::new();
    let _ = writeln!(out, "# sweep {}", dimension.name());
    let _ = writeln!(out, "# value\tLP\tLR");
    for &value in &config.sweep_values {
        match sweep_cell(
            &table,
            &heads,
            dimension,
            value,
            &sentences,
            &input_fingerprint,
            &gold.trees,
            &base_unknown,
            config,
        ) {
            Ok((lp, lr)) => {
                let _ = writeln!(out, "{value}\t{lp:.2}\t{lr:.2}");
            }
            Err(e) => {
                let message = e.to_string().replace(['\n', '\t'], " ");
                let _ = writeln!(out, "{value}\terror\t{message}");
            }
        }
    }
    if let Some(path) = &config.output {
        write_file(path, &out)?;
    }
    print!("{out}");
    Ok(())
}

/// Report fragment-table statistics.
pub fn cmd_stats(config: &RunConfig) -> Result<(), CliError> {
    let table = FragmentTable::load(RunConfig::require(&config.fragments, "fragments")?)?;
    let heads = head_table(config)?;
    let text = render_table_stats(&table, &heads);
    if let Some(path) = &config.output {
        write_file(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_detection_distinguishes_trees_from_records() {
        assert!(looks_like_records("0\t(S (NP (NN a)))\t5e-2\t3\n"));
        assert!(!looks_like_records("(S (NP (NN a)))\n"));
        assert!(!looks_like_records(""));
    }

    #[test]
    fn records_round_trip_through_render_and_parse() {
        let text = "0\t(S (NP (NN a)) (VP (VB b)))\t2.5e-3\t7\n1\t(NOPARSE)\t0e0\t0\n";
        let parsed = parse_records(text, "test").unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(
            parsed[0].as_ref().map(write_bracketed).unwrap(),
            "(S (NP (NN a)) (VP (VB b)))"
        );
        assert!(parsed[1].is_none());
    }

    #[test]
    fn sentences_read_from_tokens_or_tree_yields() {
        let tokens = read_sentences("a b c\n\nx y\n", "t").unwrap();
        assert_eq!(tokens, vec![vec!["a", "b", "c"], vec!["x", "y"]]);
        let yields = read_sentences("(S (NP (NN a)) (VP (VB b)))", "t").unwrap();
        assert_eq!(yields, vec![vec!["a", "b"]]);
    }

    #[test]
    fn toy_table_statistics_match_the_enumeration_oracle() {
        use crate::fragments::{collect, enumerate_fragments, RestrictionConfig};
        let corpus = parse_bracketed(
            "(S (NP john) (VP (V likes) (NP mary))) (S (NP peter) (VP (V hates) (NP susan)))",
            "toy",
        )
        .unwrap();
        let mut all = Vec::new();
        for tree in &corpus.trees {
            all.extend(enumerate_fragments(tree, Bound::Unlimited, 1 << 20).unwrap());
        }
        let heads = HeadTable::parse("", "t").unwrap();
        let table = collect(all, &RestrictionConfig::default(), &heads);
        let stats = render_table_stats(&table, &heads);
        assert!(stats.starts_with("total_fragments = 34\n"));
        assert!(stats.contains("root S = 20\n"));
        assert!(stats.contains("root NP = 4\n"));
        assert!(stats.contains("root VP = 8\n"));
        assert!(stats.contains("root V = 2\n"));
        // Depth histogram partitions the total.
        let depth_total: u64 = stats
            .lines()
            .filter(|l| l.starts_with("depth "))
            .map(|l| l.rsplit(' ').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(depth_total, 34);
    }
}
