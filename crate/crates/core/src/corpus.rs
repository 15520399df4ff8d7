//! Corpus ingestion: document cleanup, fixed-width context windows around
//! target words, and one bag of words per target.
//!
//! Layout contract: `<corpus_dir>/<target>/<docid>.txt`, UTF-8 plain text.
//! Documents are processed in lexicographic filename order, which stands in
//! for a relevance ranking (encode rank in filenames, e.g. `001.txt`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

const DEFAULT_TARGETS: &str = include_str!("../data/targets_default.txt");
const DEFAULT_STOPLIST: &str = include_str!("../data/stoplist_default.txt");

/// Token cleanup rules: minimum length, stoplist, numeric and case handling.
#[derive(Debug, Clone)]
pub struct CleanupRules {
    /// Tokens with fewer characters than this are dropped (default 3, i.e.
    /// words of length 2 or shorter are eliminated).
    pub min_word_length: usize,
    /// Lowercase words removed wherever they appear.
    pub stoplist: BTreeSet<String>,
    /// Drop tokens consisting only of numeric characters.
    pub drop_numeric: bool,
    /// Lowercase tokens before filtering.
    pub case_fold: bool,
}

impl CleanupRules {
    pub fn new(min_word_length: usize, stoplist: BTreeSet<String>) -> Result<Self> {
        if min_word_length == 0 {
            return Err(Error::InvalidParameter {
                name: "min_word_length",
                message: "must be at least 1".into(),
            });
        }
        for entry in &stoplist {
            if entry.is_empty() {
                return Err(Error::BadStoplistEntry {
                    entry: entry.clone(),
                    message: "empty entry".into(),
                });
            }
            if entry.chars().any(char::is_whitespace) {
                return Err(Error::BadStoplistEntry {
                    entry: entry.clone(),
                    message: "contains whitespace".into(),
                });
            }
            if *entry != entry.to_lowercase() {
                return Err(Error::BadStoplistEntry {
                    entry: entry.clone(),
                    message: "not lowercase".into(),
                });
            }
        }
        Ok(CleanupRules {
            min_word_length,
            stoplist,
            drop_numeric: true,
            case_fold: true,
        })
    }

    /// Rules with the bundled stoplist and the default minimum length of 3.
    pub fn default_rules() -> Self {
        CleanupRules::new(3, default_stoplist()).expect("bundled stoplist is valid")
    }

    /// Does a (already case-folded) token survive the filter?
    pub fn accepts(&self, token: &str) -> bool {
        if token.chars().count() < self.min_word_length {
            return false;
        }
        if self.drop_numeric && token.chars().all(char::is_numeric) {
            return false;
        }
        !self.stoplist.contains(token)
    }
}

/// Splits on whitespace and any non-alphanumeric character, case-folds, and
/// drops tokens that fail [`CleanupRules`]. Order is preserved.
pub fn tokenize(text: &str, rules: &CleanupRules) -> Vec<String> {
    tokenize_inner(text, rules, None)
}

/// Like [`tokenize`], but a token equal to `target` is kept even when it
/// violates the rules. Without the exemption a short or stoplisted target
/// would delete its own window anchor.
pub fn tokenize_for_target(text: &str, rules: &CleanupRules, target: &str) -> Vec<String> {
    tokenize_inner(text, rules, Some(target))
}

fn tokenize_inner(text: &str, rules: &CleanupRules, exempt: Option<&str>) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|raw| !raw.is_empty())
        .filter_map(|raw| {
            let token = if rules.case_fold {
                raw.to_lowercase()
            } else {
                raw.to_string()
            };
            if exempt == Some(token.as_str()) || rules.accepts(&token) {
                Some(token)
            } else {
                None
            }
        })
        .collect()
}

/// A span of exactly `2h + 1` valid tokens with the target at index `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub target: String,
    pub tokens: Vec<String>,
    pub source_doc: String,
    pub half_width: usize,
}

impl ContextWindow {
    pub fn new(
        target: String,
        tokens: Vec<String>,
        source_doc: String,
        half_width: usize,
    ) -> Result<Self> {
        let expected = 2 * half_width + 1;
        if tokens.len() != expected {
            return Err(Error::BadWindowLength {
                target,
                len: tokens.len(),
                expected,
            });
        }
        if tokens[half_width] != target {
            return Err(Error::MisplacedTarget {
                found: tokens[half_width].clone(),
                target,
            });
        }
        Ok(ContextWindow {
            target,
            tokens,
            source_doc,
            half_width,
        })
    }
}

/// Extracts windows of `2h + 1` tokens centered on occurrences of `target`
/// within one tokenized document. Occurrences without `h` full tokens on each
/// side are skipped. With `one_per_doc` only the first qualifying occurrence
/// is used; output is truncated to `max_contexts`.
pub fn extract_contexts(
    tokens: &[String],
    target: &str,
    half_width: usize,
    max_contexts: usize,
    one_per_doc: bool,
    doc_id: &str,
) -> Vec<ContextWindow> {
    let mut windows = Vec::new();
    if tokens.len() < 2 * half_width + 1 {
        return windows;
    }
    for p in half_width..=(tokens.len() - half_width - 1) {
        if tokens[p] != target {
            continue;
        }
        let window = ContextWindow {
            target: target.to_string(),
            tokens: tokens[p - half_width..=p + half_width].to_vec(),
            source_doc: doc_id.to_string(),
            half_width,
        };
        windows.push(window);
        if one_per_doc || windows.len() == max_contexts {
            break;
        }
    }
    windows
}

/// Multiset of context words for one target: word -> positive count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfWords {
    target: String,
    counts: BTreeMap<String, u32>,
    total: u64,
}

impl BagOfWords {
    /// Builds a bag directly from counts, validating that counts are positive
    /// and `total` matches their sum.
    pub fn from_counts(target: String, counts: BTreeMap<String, u32>) -> Result<Self> {
        for (word, &count) in &counts {
            if count == 0 {
                return Err(Error::InvalidParameter {
                    name: "counts",
                    message: format!("zero count for {word:?} in bag {target:?}"),
                });
            }
        }
        let total = counts.values().map(|&c| u64::from(c)).sum();
        Ok(BagOfWords {
            target,
            counts,
            total,
        })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn counts(&self) -> &BTreeMap<String, u32> {
        &self.counts
    }

    pub fn count(&self, word: &str) -> u32 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// Total number of word tokens: `num_contexts * (2h + 1)` for bags built
    /// from windows.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct_words(&self) -> usize {
        self.counts.len()
    }
}

/// Lumps all windows of one target into a single bag. The target's own
/// occurrences are counted (it appears at least once per window).
pub fn build_bag(windows: &[ContextWindow]) -> Result<BagOfWords> {
    let first = windows.first().ok_or(Error::EmptyWindowList)?;
    let target = first.target.clone();
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut total = 0u64;
    for window in windows {
        if window.target != target {
            return Err(Error::MixedTargets {
                expected: target,
                found: window.target.clone(),
            });
        }
        for token in &window.tokens {
            *counts.entry(token.clone()).or_insert(0) += 1;
            total += 1;
        }
    }
    Ok(BagOfWords {
        target,
        counts,
        total,
    })
}

/// Outcome of corpus assembly: which targets made the cut and corpus-level
/// vocabulary statistics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CorpusReport {
    pub included_targets: Vec<String>,
    pub excluded_targets: Vec<ExcludedTarget>,
    /// Number of distinct words across all included bags.
    pub vocabulary_size: usize,
    /// Sum of bag totals.
    pub total_words: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExcludedTarget {
    pub target: String,
    pub contexts_found: usize,
}

/// Corpus-stage knobs extracted from [`PipelineConfig`].
#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub half_width: usize,
    pub max_contexts: usize,
    pub one_per_doc: bool,
}

impl From<&PipelineConfig> for IngestOptions {
    fn from(cfg: &PipelineConfig) -> Self {
        IngestOptions {
            half_width: cfg.half_width,
            max_contexts: cfg.max_contexts,
            one_per_doc: cfg.one_per_doc,
        }
    }
}

/// Ingests the corpus directory for every target, in input-list order.
/// Targets yielding at least `max_contexts` windows are included with exactly
/// `max_contexts` windows (first in filename order); the rest are excluded
/// and reported with the number of contexts found. A missing target directory
/// excludes the target with zero contexts.
pub fn assemble_corpus(
    corpus_dir: &Path,
    targets: &[String],
    rules: &CleanupRules,
    opts: &IngestOptions,
) -> Result<(Vec<BagOfWords>, CorpusReport)> {
    let mut bags = Vec::new();
    let mut included = Vec::new();
    let mut excluded = Vec::new();

    for target in targets {
        let windows = collect_target_windows(corpus_dir, target, rules, opts)?;
        if windows.len() >= opts.max_contexts {
            let bag = build_bag(&windows[..opts.max_contexts])?;
            included.push(target.clone());
            bags.push(bag);
        } else {
            excluded.push(ExcludedTarget {
                target: target.clone(),
                contexts_found: windows.len(),
            });
        }
    }

    let mut vocabulary: BTreeSet<&str> = BTreeSet::new();
    let mut total_words = 0u64;
    for bag in &bags {
        vocabulary.extend(bag.counts().keys().map(String::as_str));
        total_words += bag.total();
    }

    let report = CorpusReport {
        included_targets: included,
        excluded_targets: excluded,
        vocabulary_size: vocabulary.len(),
        total_words,
    };
    Ok((bags, report))
}

fn collect_target_windows(
    corpus_dir: &Path,
    target: &str,
    rules: &CleanupRules,
    opts: &IngestOptions,
) -> Result<Vec<ContextWindow>> {
    let dir = corpus_dir.join(target);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }

    let mut doc_paths = Vec::new();
    let entries = fs::read_dir(&dir).map_err(|e| Error::read(&dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::read(&dir, e))?;
        let path = entry.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "txt") {
            doc_paths.push(path);
        }
    }
    doc_paths.sort();

    let mut windows = Vec::new();
    for path in doc_paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::read(&path, e))?;
        let tokens = tokenize_for_target(&text, rules, target);
        let doc_id = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let remaining = opts.max_contexts - windows.len();
        windows.extend(extract_contexts(
            &tokens,
            target,
            opts.half_width,
            remaining,
            opts.one_per_doc,
            &doc_id,
        ));
        if windows.len() >= opts.max_contexts {
            break;
        }
    }
    Ok(windows)
}

/// Parses a word-list file: one word per line, `#` starts a comment, entries
/// are case-folded. Rejects entries containing whitespace.
pub fn parse_word_list(text: &str, origin: &Path) -> Result<Vec<String>> {
    let mut words = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                origin,
                idx + 1,
                format!("expected a single word, got {line:?}"),
            ));
        }
        words.push(line.to_lowercase());
    }
    Ok(words)
}

/// Loads an ordered target list. Duplicate targets are rejected.
pub fn load_targets(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    let targets = parse_word_list(&text, path)?;
    let mut seen = BTreeSet::new();
    for (idx, target) in targets.iter().enumerate() {
        if !seen.insert(target.clone()) {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("duplicate target {target:?}"),
            ));
        }
    }
    Ok(targets)
}

pub fn load_stoplist(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::read(path, e))?;
    Ok(parse_word_list(&text, path)?.into_iter().collect())
}

/// The bundled 142-word default target list.
pub fn default_targets() -> Vec<String> {
    parse_word_list(DEFAULT_TARGETS, Path::new("<builtin targets>"))
        .expect("bundled target list is valid")
}

/// The bundled default stoplist (function words).
pub fn default_stoplist() -> BTreeSet<String> {
    parse_word_list(DEFAULT_STOPLIST, Path::new("<builtin stoplist>"))
        .expect("bundled stoplist is valid")
        .into_iter()
        .collect()
}

/// Writes bags as JSON lines: `{"target": ..., "counts": {...}, "total": n}`
/// with counts keys sorted lexicographically.
pub fn write_bags(path: &Path, bags: &[BagOfWords]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
    let mut out = BufWriter::new(file);
    for bag in bags {
        let line = serde_json::to_string(bag).expect("bag serializes");
        writeln!(out, "{line}").map_err(|e| Error::write(path, e))?;
    }
    out.flush().map_err(|e| Error::write(path, e))
}

/// Reads bags back from JSON lines, validating counts and totals.
pub fn read_bags(path: &Path) -> Result<Vec<BagOfWords>> {
    let file = fs::File::open(path).map_err(|e| Error::read(path, e))?;
    let reader = BufReader::new(file);
    let mut bags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::read(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bag: BagOfWords = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let rebuilt = BagOfWords::from_counts(bag.target.clone(), bag.counts.clone())
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if rebuilt.total != bag.total {
            return Err(Error::parse(
                path,
                idx + 1,
                format!(
                    "total {} does not match sum of counts {}",
                    bag.total, rebuilt.total
                ),
            ));
        }
        bags.push(bag);
    }
    Ok(bags)
}
