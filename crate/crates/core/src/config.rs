//! Pipeline configuration shared by the library stages and the CLI.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cluster::DistanceKind;

/// Every tunable parameter of the pipeline. The CLI builds one of these from
/// defaults, an optional config file, and flags (in that order of precedence).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory with one subdirectory of `.txt` documents per target word.
    pub corpus_dir: Option<PathBuf>,
    /// Target list file (one word per line); `None` uses the bundled list.
    pub targets_file: Option<PathBuf>,
    /// Stoplist file (one word per line); `None` uses the bundled list.
    pub stoplist_file: Option<PathBuf>,
    /// Context half-width h: each window spans 2h + 1 tokens.
    pub half_width: usize,
    /// Contexts kept per target; targets with fewer are excluded.
    pub max_contexts: usize,
    /// Tokens shorter than this are dropped during cleanup.
    pub min_word_length: usize,
    /// Use at most one context per document (first qualifying occurrence).
    pub one_per_doc: bool,
    /// Seed for the shuffled null model. Replicate r uses `seed + r` (0-based).
    pub seed: u64,
    /// Number of independent null-model shuffles.
    pub replicates: usize,
    /// Similarity-to-distance conversion used before Ward clustering.
    pub distance: DistanceKind,
    /// Cluster count for the flat partition cut.
    pub k: usize,
    /// Directory all stage outputs are written to.
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: None,
            targets_file: None,
            stoplist_file: None,
            half_width: 20,
            max_contexts: 50,
            min_word_length: 3,
            one_per_doc: true,
            seed: 0,
            replicates: 1,
            distance: DistanceKind::Sqrt2,
            k: 25,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Checks the numeric-parameter invariants. Returns a human-readable
    /// message for the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.half_width == 0 {
            return Err("half_width must be at least 1".into());
        }
        if self.max_contexts == 0 {
            return Err("max_contexts must be at least 1".into());
        }
        if self.min_word_length == 0 {
            return Err("min_word_length must be at least 1".into());
        }
        if self.replicates == 0 {
            return Err("replicates must be at least 1".into());
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        Ok(())
    }

    /// Seed used for null-model replicate `r` (0-based).
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}
