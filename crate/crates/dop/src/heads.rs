//! Head-child percolation (Magerman-style) and head-word bookkeeping.
//!
//! A head table maps a parent label to ordered search passes; each pass scans
//! the children from one side for the first match of each priority label.
//! Head *words* are positions, not strings: a fragment's head word is the
//! frontier terminal reached by descending head children from the root, and
//! it may not exist (the descent can end at a substitution site).

use std::collections::HashMap;
use std::path::Path;

use crate::treebank::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    fn parse(s: &str) -> Option<Direction> {
        match s {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Pass {
    direction: Direction,
    priorities: Vec<String>,
}

/// Parent label to head-search passes, plus the endpoint rule for parents
/// with no entry at all.
#[derive(Debug, Clone)]
pub struct HeadTable {
    rules: HashMap<String, Vec<Pass>>,
    pub default_direction: Direction,
}

#[derive(Debug, thiserror::Error)]
pub enum HeadError {
    #[error("{source_name}:{line}: {msg}")]
    ParseTable {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error("failed to read {path}: {err}")]
    Io { path: String, err: std::io::Error },
}

const DEFAULT_TABLE: &str = include_str!("../data/heads_wsj.tbl");

impl HeadTable {
    /// The bundled WSJ-style table.
    pub fn wsj_default() -> HeadTable {
        HeadTable::parse(DEFAULT_TABLE, "<builtin>").expect("bundled head table parses")
    }

    /// Parse the line-oriented table format: `PARENT direction child ...`,
    /// `#` comments, optional `@default left|right`.
    pub fn parse(text: &str, source_name: &str) -> Result<HeadTable, HeadError> {
        let mut table = HeadTable {
            rules: HashMap::new(),
            default_direction: Direction::Left,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |msg: String| HeadError::ParseTable {
                source_name: source_name.to_string(),
                line: i + 1,
                msg,
            };
            let mut fields = line.split_whitespace();
            let parent = fields.next().expect("non-empty line has a first field");
            let Some(dir_text) = fields.next() else {
                return Err(fail(format!("`{parent}` entry is missing a direction")));
            };
            let Some(direction) = Direction::parse(dir_text) else {
                return Err(fail(format!("unknown direction `{dir_text}` (expected `left` or `right`)")));
            };
            let priorities: Vec<String> = fields.map(str::to_string).collect();
            if parent == "@default" {
                if !priorities.is_empty() {
                    return Err(fail("`@default` takes a direction only".to_string()));
                }
                table.default_direction = direction;
            } else {
                table
                    .rules
                    .entry(parent.to_string())
                    .or_default()
                    .push(Pass { direction, priorities });
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<HeadTable, HeadError> {
        let text = std::fs::read_to_string(path).map_err(|err| HeadError::Io {
            path: path.display().to_string(),
            err,
        })?;
        HeadTable::parse(&text, &path.display().to_string())
    }

    pub fn has_entry(&self, parent: &str) -> bool {
        self.rules.contains_key(parent)
    }
}

fn endpoint(direction: Direction, len: usize) -> usize {
    match direction {
        Direction::Left => 0,
        Direction::Right => len - 1,
    }
}

/// Index of the head child among `child_labels` (which must be nonempty).
/// Falls back to the scan-side endpoint of the parent's first pass, or to the
/// table default direction for unlisted parents.
pub fn head_child_index(parent: &str, child_labels: &[&str], table: &HeadTable) -> usize {
    assert!(!child_labels.is_empty(), "head search over zero children");
    match table.rules.get(parent) {
        Some(passes) => {
            for pass in passes {
                for p in &pass.priorities {
                    let found = match pass.direction {
                        Direction::Left => child_labels.iter().position(|l| l == p),
                        Direction::Right => child_labels.iter().rposition(|l| l == p),
                    };
                    if let Some(i) = found {
                        return i;
                    }
                }
            }
            endpoint(passes[0].direction, child_labels.len())
        }
        None => endpoint(table.default_direction, child_labels.len()),
    }
}

/// Walk head children from the root. `Some(i)` means the descent ended at the
/// i-th frontier terminal (0-based, counting terminals only); `None` means it
/// ended at a substitution site, so the tree has no head word.
fn head_terminal_index(tree: &Tree, table: &HeadTable) -> Option<usize> {
    let mut node = tree;
    let mut offset = 0usize;
    loop {
        match node {
            Tree::Leaf { .. } => return Some(offset),
            Tree::Node { children, .. } if children.is_empty() => return None,
            Tree::Node { label, children } => {
                let labels: Vec<&str> = children.iter().map(Tree::label).collect();
                let h = head_child_index(label, &labels, table);
                for c in &children[..h] {
                    offset += c.yield_words().len();
                }
                node = &children[h];
            }
        }
    }
}

/// The root's head word, if the head descent reaches a terminal.
pub fn head_word<'a>(tree: &'a Tree, table: &HeadTable) -> Option<&'a str> {
    let idx = head_terminal_index(tree, table)?;
    tree.yield_words().get(idx).copied()
}

/// Number of frontier terminals that are not the root's head word (positional
/// identity: duplicates of the head word elsewhere in the frontier count).
pub fn nonheadword_count(tree: &Tree, table: &HeadTable) -> usize {
    let words = tree.yield_words().len();
    match head_terminal_index(tree, table) {
        Some(_) => words - 1,
        None => words,
    }
}
