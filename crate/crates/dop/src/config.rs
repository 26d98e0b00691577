//! Run configuration: a line-oriented `key = value` file plus command-line
//! overrides. Every run is reproducible from its config and seed; there is
//! no environment-variable configuration.

use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::fragments::{Bound, RestrictionConfig};
use crate::treebank::DEFAULT_PUNCTUATION_TAGS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingKind {
    None,
    GoodTuring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDimension {
    Depth,
    Words,
    UnlexDepth,
    NonHeadWords,
}

impl SweepDimension {
    pub fn name(self) -> &'static str {
        match self {
            SweepDimension::Depth => "depth",
            SweepDimension::Words => "words",
            SweepDimension::UnlexDepth => "unlexdepth",
            SweepDimension::NonHeadWords => "nonheadwords",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}: malformed config line (expected `key = value`)")]
    MalformedLine { source_name: String, line: usize },
    #[error("{source_name}:{line}: unknown config key `{key}`")]
    UnknownKey { source_name: String, line: usize, key: String },
    #[error("{source_name}:{line}: invalid value for `{key}`: {message}")]
    InvalidValue { source_name: String, line: usize, key: String, message: String },
    #[error("config key `{0}` is required for this command")]
    MissingKey(&'static str),
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
}

/// Full configuration of a run. Defaults follow the reference regime:
/// exhaustive depth-1 extraction plus 400,000 sampled fragments per depth
/// 2..=14, k = 1000 best derivations, beam 10⁻⁵.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Parse input: raw token lines or a treebank whose yields are parsed.
    pub input: Option<PathBuf>,
    pub fragments: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub heads: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
    pub restrictions: RestrictionConfig,
    /// (depth, sample count) pairs for sampled extraction.
    pub sample_plan: Vec<(usize, usize)>,
    /// Extract every fragment instead of sampling (oracle mode).
    pub exhaustive: bool,
    pub k: usize,
    pub beam: f64,
    pub smoothing: SmoothingKind,
    pub unknown: bool,
    pub rare_threshold: u64,
    pub normalize: bool,
    pub punctuation_tags: BTreeSet<String>,
    pub cutoffs: Vec<usize>,
    /// Ceiling on exhaustive per-tree fragment enumeration.
    pub enumeration_ceiling: u128,
    /// Worker threads for sentence-parallel parsing; 0 = library default.
    pub workers: usize,
    pub sweep_dimension: Option<SweepDimension>,
    pub sweep_values: Vec<Bound>,
    /// Emit a per-sentence bracket diff after eval reports.
    pub diff: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: None,
            dev: None,
            test: None,
            input: None,
            fragments: None,
            model: None,
            output: None,
            heads: None,
            cache_dir: None,
            seed: 1,
            restrictions: RestrictionConfig::default(),
            sample_plan: (2..=14).map(|d| (d, 400_000)).collect(),
            exhaustive: false,
            k: 1000,
            beam: 1e-5,
            smoothing: SmoothingKind::None,
            unknown: true,
            rare_threshold: 5,
            normalize: true,
            punctuation_tags: DEFAULT_PUNCTUATION_TAGS.iter().map(|s| s.to_string()).collect(),
            cutoffs: vec![40, 100],
            enumeration_ceiling: 50_000_000,
            workers: 0,
            sweep_dimension: None,
            sweep_values: Vec::new(),
            diff: false,
        }
    }
}

fn invalid(source_name: &str, line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        source_name: source_name.to_string(),
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Apply one `key = value` assignment.
    fn assign(&mut self, key: &str, value: &str, source_name: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| invalid(source_name, line, key, message);
        let parse_bound = |v: &str| v.parse::<Bound>().map_err(|e| bad(e.to_string()));
        match key {
            "train" => self.train = Some(PathBuf::from(value)),
            "dev" => self.dev = Some(PathBuf::from(value)),
            "test" => self.test = Some(PathBuf::from(value)),
            "input" => self.input = Some(PathBuf::from(value)),
            "fragments" => self.fragments = Some(PathBuf::from(value)),
            "model" => self.model = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "heads" => self.heads = Some(PathBuf::from(value)),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse().map_err(|_| bad("expected an integer".into()))?,
            "max_depth" => self.restrictions.max_depth = parse_bound(value)?,
            "max_frontier_words" => self.restrictions.max_frontier_words = parse_bound(value)?,
            "max_unlexicalized_depth" => {
                self.restrictions.max_unlexicalized_depth = parse_bound(value)?
            }
            "max_nonheadwords" => self.restrictions.max_nonheadwords = parse_bound(value)?,
            "sample_plan" => {
                let mut plan = Vec::new();
                for part in value.split_whitespace() {
                    let (d, n) = part
                        .split_once(':')
                        .ok_or_else(|| bad(format!("expected depth:count, got `{part}`")))?;
                    let depth = d.parse().map_err(|_| bad(format!("bad depth `{d}`")))?;
                    let count = n.parse().map_err(|_| bad(format!("bad count `{n}`")))?;
                    plan.push((depth, count));
                }
                self.sample_plan = plan;
            }
            "exhaustive" => self.exhaustive = parse_bool(value).map_err(bad)?,
            "k" => self.k = value.parse().map_err(|_| bad("expected an integer".into()))?,
            "beam" => {
                let beam: f64 = value.parse().map_err(|_| bad("expected a number".into()))?;
                if !(beam >= 0.0) {
                    return Err(bad("beam must be >= 0".into()));
                }
                self.beam = beam;
            }
            "smoothing" => {
                self.smoothing = match value {
                    "none" => SmoothingKind::None,
                    "good_turing" => SmoothingKind::GoodTuring,
                    other => return Err(bad(format!("expected none|good_turing, got `{other}`"))),
                }
            }
            "unknown" => self.unknown = parse_bool(value).map_err(bad)?,
            "rare_threshold" => {
                self.rare_threshold = value.parse().map_err(|_| bad("expected an integer".into()))?
            }
            "normalize" => self.normalize = parse_bool(value).map_err(bad)?,
            "punctuation_tags" => {
                self.punctuation_tags = value.split_whitespace().map(str::to_string).collect()
            }
            "cutoffs" => {
                let mut cutoffs = Vec::new();
                for part in value.split_whitespace() {
                    cutoffs.push(part.parse().map_err(|_| bad(format!("bad cutoff `{part}`")))?);
                }
                self.cutoffs = cutoffs;
            }
            "enumeration_ceiling" => {
                self.enumeration_ceiling =
                    value.parse().map_err(|_| bad("expected an integer".into()))?
            }
            "workers" => {
                self.workers = value.parse().map_err(|_| bad("expected an integer".into()))?
            }
            "sweep_dimension" => {
                self.sweep_dimension = Some(match value {
                    "depth" => SweepDimension::Depth,
                    "words" => SweepDimension::Words,
                    "unlexdepth" => SweepDimension::UnlexDepth,
                    "nonheadwords" => SweepDimension::NonHeadWords,
                    other => {
                        return Err(bad(format!(
                            "expected depth|words|unlexdepth|nonheadwords, got `{other}`"
                        )))
                    }
                })
            }
            "sweep_values" => {
                let mut values = Vec::new();
                for part in value.split_whitespace() {
                    values.push(part.parse::<Bound>().map_err(|e| bad(e.to_string()))?);
                }
                self.sweep_values = values;
            }
            "diff" => self.diff = parse_bool(value).map_err(bad)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    source_name: source_name.to_string(),
                    line,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Parse a config file body.
    pub fn parse(text: &str, source_name: &str) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        config.merge(text, source_name)?;
        Ok(config)
    }

    /// Apply `key = value` lines on top of the current configuration.
    pub fn merge(&mut self, text: &str, source_name: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    source_name: source_name.to_string(),
                    line: i + 1,
                });
            };
            self.assign(key.trim(), value.trim(), source_name, i + 1)?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text, &path.display().to_string())
    }

    /// Apply `--set key=value` overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for (i, assignment) in overrides.iter().enumerate() {
            let Some((key, value)) = assignment.split_once('=') else {
                return Err(ConfigError::MalformedLine {
                    source_name: "--set".to_string(),
                    line: i + 1,
                });
            };
            self.assign(key.trim(), value.trim(), "--set", i + 1)?;
        }
        Ok(())
    }

    pub fn require<'a>(
        path: &'a Option<PathBuf>,
        key: &'static str,
    ) -> Result<&'a PathBuf, ConfigError> {
        path.as_ref().ok_or(ConfigError::MissingKey(key))
    }
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true|false, got `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_regime() {
        let config = RunConfig::default();
        assert_eq!(config.k, 1000);
        assert_eq!(config.beam, 1e-5);
        assert_eq!(config.sample_plan.len(), 13);
        assert_eq!(config.sample_plan[0], (2, 400_000));
        assert_eq!(config.sample_plan[12], (14, 400_000));
        assert!(!config.exhaustive);
        assert_eq!(config.rare_threshold, 5);
        assert_eq!(config.cutoffs, vec![40, 100]);
    }

    #[test]
    fn parses_keys_comments_and_blank_lines() {
        let text = "\
# a comment
train = data/train.mrg
seed = 7

max_depth = 4
max_frontier_words = unlimited
sample_plan = 2:10 3:5
exhaustive = true
beam = 0
smoothing = good_turing
sweep_dimension = words
sweep_values = 1 2 unlimited
";
        let config = RunConfig::parse(text, "test.cfg").unwrap();
        assert_eq!(config.train.as_deref(), Some(std::path::Path::new("data/train.mrg")));
        assert_eq!(config.seed, 7);
        assert_eq!(config.restrictions.max_depth, Bound::Finite(4));
        assert_eq!(config.restrictions.max_frontier_words, Bound::Unlimited);
        assert_eq!(config.sample_plan, vec![(2, 10), (3, 5)]);
        assert!(config.exhaustive);
        assert_eq!(config.beam, 0.0);
        assert_eq!(config.smoothing, SmoothingKind::GoodTuring);
        assert_eq!(config.sweep_dimension, Some(SweepDimension::Words));
        assert_eq!(
            config.sweep_values,
            vec![Bound::Finite(1), Bound::Finite(2), Bound::Unlimited]
        );
    }

    #[test]
    fn overrides_win_over_file_values() {
        let mut config = RunConfig::parse("k = 10\nbeam = 1e-3", "test.cfg").unwrap();
        config.apply_overrides(&["k=25".to_string(), "seed=99".to_string()]).unwrap();
        assert_eq!(config.k, 25);
        assert_eq!(config.beam, 1e-3);
        assert_eq!(config.seed, 99);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(
            RunConfig::parse("fragmnets = x", "t").unwrap_err(),
            ConfigError::UnknownKey { key, .. } if key == "fragmnets"
        ));
        assert!(matches!(
            RunConfig::parse("beam = -1", "t").unwrap_err(),
            ConfigError::InvalidValue { .. }
        ));
        assert!(matches!(
            RunConfig::parse("just a line", "t").unwrap_err(),
            ConfigError::MalformedLine { line: 1, .. }
        ));
        assert!(matches!(
            RunConfig::parse("sample_plan = 2-10", "t").unwrap_err(),
            ConfigError::InvalidValue { .. }
        ));
    }
}
