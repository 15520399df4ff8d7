//! Similarity structure over bags of words: raw multiset overlap, its sparse
//! dot-product form, cosine normalization, the shuffled null model, and
//! rank-order statistics of the resulting matrix.

use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::BagOfWords;
use crate::error::{Error, Result};
use crate::mat::Matrix;

/// Bijective word <-> index map with indices assigned in lexicographic word
/// order. The order itself is immaterial for the dot products; fixing it
/// keeps every downstream artifact reproducible.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Collects the distinct words of all bags, sorted.
    pub fn from_bags(bags: &[BagOfWords]) -> Self {
        let mut words: Vec<String> = bags
            .iter()
            .flat_map(|b| b.counts().keys().cloned())
            .collect();
        words.sort();
        words.dedup();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }
}

/// Sparse count vector over a vocabulary of dimension `dim`. Entries are
/// stored as `(index, count)` sorted by index, counts strictly positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseVector {
    entries: Vec<(usize, u32)>,
    dim: usize,
}

impl SparseVector {
    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Represents a bag as a sparse count vector over `vocab`.
pub fn vectorize(bag: &BagOfWords, vocab: &Vocabulary) -> Result<SparseVector> {
    let mut entries = Vec::with_capacity(bag.distinct_words());
    for (word, &count) in bag.counts() {
        let index = vocab
            .index_of(word)
            .ok_or_else(|| Error::WordNotInVocabulary { word: word.clone() })?;
        entries.push((index, count));
    }
    // Bag counts iterate in lexicographic word order, which matches index
    // order by construction of the vocabulary.
    debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
    Ok(SparseVector {
        entries,
        dim: vocab.len(),
    })
}

/// Sparse dot product, iterating only shared indices.
pub fn dot(a: &SparseVector, b: &SparseVector) -> Result<u64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let mut sum = 0u64;
    let (mut i, mut j) = (0, 0);
    while i < a.entries.len() && j < b.entries.len() {
        let (ia, ca) = a.entries[i];
        let (ib, cb) = b.entries[j];
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += u64::from(ca) * u64::from(cb);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(sum)
}

/// Raw similarity of two bags: every word occurring n times in one bag and m
/// times in the other contributes n*m. Symmetric; equals the dot product of
/// the count vectors.
pub fn raw_similarity(bag_i: &BagOfWords, bag_j: &BagOfWords) -> u64 {
    // Iterate the bag with fewer distinct words.
    let (small, large) = if bag_i.distinct_words() <= bag_j.distinct_words() {
        (bag_i, bag_j)
    } else {
        (bag_j, bag_i)
    };
    small
        .counts()
        .iter()
        .map(|(word, &n)| u64::from(n) * u64::from(large.count(word)))
        .sum()
}

/// Cosine normalization: `s_ij / sqrt(s_ii * s_jj)`, in [0, 1] for count
/// vectors. A zero diagonal means an empty bag upstream.
pub fn normalized_similarity(s_ij: u64, s_ii: u64, s_jj: u64) -> Result<f64> {
    if s_ii == 0 || s_jj == 0 {
        return Err(Error::ZeroDiagonal {
            label: String::from("<unlabeled>"),
        });
    }
    Ok(s_ij as f64 / ((s_ii as f64) * (s_jj as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    /// Unit diagonal, entries in [0, 1].
    Normalized,
    /// Nonnegative integer-valued overlaps.
    Raw,
}

/// Symmetric n x n similarity matrix with target labels. Holds either the
/// normalized matrix S, its raw counterpart, or the null-model matrix R.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    labels: Vec<String>,
    kind: MatrixKind,
    mat: Matrix,
}

impl SimilarityMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.mat.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.mat
    }

    fn from_parts(labels: Vec<String>, kind: MatrixKind, mat: Matrix) -> Result<Self> {
        let s = SimilarityMatrix { labels, kind, mat };
        s.validate()?;
        Ok(s)
    }

    /// Checks symmetry plus the per-kind value contracts (exact unit diagonal
    /// and [0, 1] range for normalized; nonnegative integers for raw).
    pub fn validate(&self) -> Result<()> {
        let n = self.mat.n();
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch {
                left: self.labels.len(),
                right: n,
            });
        }
        self.mat.require_symmetric(1e-12)?;
        match self.kind {
            MatrixKind::Normalized => {
                for i in 0..n {
                    if self.mat.get(i, i) != 1.0 {
                        return Err(Error::BadMatrixValue {
                            row: i,
                            col: i,
                            value: self.mat.get(i, i),
                            expected: "unit diagonal",
                        });
                    }
                    for j in 0..n {
                        let v = self.mat.get(i, j);
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::SimilarityOutOfRange {
                                row: i,
                                col: j,
                                value: v,
                            });
                        }
                    }
                }
            }
            MatrixKind::Raw => {
                for i in 0..n {
                    for j in 0..n {
                        let v = self.mat.get(i, j);
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(Error::BadMatrixValue {
                                row: i,
                                col: j,
                                value: v,
                                expected: "nonnegative integer",
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the matrix as CSV: first row and column carry the labels,
    /// values with 9 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for i in 0..self.n() {
            let mut record = vec![self.labels[i].clone()];
            record.extend((0..self.n()).map(|j| format_sig9(self.mat.get(i, j))));
            w.write_record(&record).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::write(path, e))
    }

    /// Reads a matrix written by [`SimilarityMatrix::write_csv`], validating
    /// labels, symmetry and the `kind` contract.
    pub fn read_csv(path: &Path, kind: MatrixKind) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::read(path, e))?;
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(file);
        let mut rows: Vec<csv::StringRecord> = Vec::new();
        for record in r.records() {
            rows.push(record.map_err(|e| csv_err(path, e))?);
        }
        if rows.is_empty() {
            return Err(Error::parse(path, 1, "empty matrix file"));
        }
        let labels: Vec<String> = rows[0].iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        if rows.len() != n + 1 {
            return Err(Error::parse(
                path,
                rows.len(),
                format!("expected {} data rows, got {}", n, rows.len() - 1),
            ));
        }
        let mut mat = Matrix::zeros(n);
        for (i, row) in rows[1..].iter().enumerate() {
            if row.len() != n + 1 {
                return Err(Error::parse(path, i + 2, "wrong number of columns"));
            }
            if row.get(0) != Some(labels[i].as_str()) {
                return Err(Error::parse(
                    path,
                    i + 2,
                    format!(
                        "row label {:?} does not match column label {:?}",
                        row.get(0).unwrap_or(""),
                        labels[i]
                    ),
                ));
            }
            for j in 0..n {
                let cell = row.get(j + 1).unwrap_or("");
                let value: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse(path, i + 2, format!("bad number {cell:?}")))?;
                mat.set(i, j, value);
            }
        }
        SimilarityMatrix::from_parts(labels, kind, mat)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, 0, e.to_string())
}

/// Formats with 9 significant digits (scientific notation), the serialization
/// precision used by every CSV artifact. Parsing the result back is
/// deterministic.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Builds the normalized similarity matrix over all bags: unit diagonal,
/// each unordered pair computed once.
pub fn build_similarity_matrix(bags: &[BagOfWords]) -> Result<SimilarityMatrix> {
    let n = bags.len();
    if n < 2 {
        return Err(Error::TooFewBags { n });
    }
    let diag: Vec<u64> = bags.iter().map(|b| raw_similarity(b, b)).collect();
    for (bag, &d) in bags.iter().zip(&diag) {
        if d == 0 {
            return Err(Error::ZeroDiagonal {
                label: bag.target().to_string(),
            });
        }
    }
    let mut mat = Matrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let raw = raw_similarity(&bags[i], &bags[j]);
            let value = normalized_similarity(raw, diag[i], diag[j])?;
            mat.set_sym(i, j, value.min(1.0));
        }
    }
    let labels = bags.iter().map(|b| b.target().to_string()).collect();
    SimilarityMatrix::from_parts(labels, MatrixKind::Normalized, mat)
}

/// Raw (unnormalized) overlap matrix; mostly useful for inspection.
pub fn raw_similarity_matrix(bags: &[BagOfWords]) -> Result<SimilarityMatrix> {
    let n = bags.len();
    if n < 2 {
        return Err(Error::TooFewBags { n });
    }
    let mut mat = Matrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            mat.set_sym(i, j, raw_similarity(&bags[i], &bags[j]) as f64);
        }
    }
    let labels = bags.iter().map(|b| b.target().to_string()).collect();
    SimilarityMatrix::from_parts(labels, MatrixKind::Raw, mat)
}

/// One off-diagonal entry in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub value: f64,
    pub label_i: String,
    pub label_j: String,
}

/// The n(n-1)/2 distinct off-diagonal entries sorted from largest to
/// smallest; ties broken by (i, j) index order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntries {
    entries: Vec<RankedEntry>,
}

impl RankedEntries {
    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes CSV with columns rank,value,label_i,label_j.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["rank", "value", "label_i", "label_j"])
            .map_err(|e| csv_err(path, e))?;
        for e in &self.entries {
            w.write_record([
                e.rank.to_string(),
                format_sig9(e.value),
                e.label_i.clone(),
                e.label_j.clone(),
            ])
            .map_err(|err| csv_err(path, err))?;
        }
        w.flush().map_err(|e| Error::write(path, e))
    }
}

/// Ranks the distinct off-diagonal entries of a matrix, descending.
pub fn rank_entries(m: &SimilarityMatrix) -> RankedEntries {
    let n = m.n();
    let mut raw: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            raw.push((m.get(i, j), i, j));
        }
    }
    raw.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    let entries = raw
        .into_iter()
        .enumerate()
        .map(|(idx, (value, i, j))| RankedEntry {
            rank: idx + 1,
            value,
            label_i: m.labels()[i].clone(),
            label_j: m.labels()[j].clone(),
        })
        .collect();
    RankedEntries { entries }
}

/// Ordinary least squares fit y ~ intercept + slope * x.
/// Returns `None` for fewer than 2 points or a degenerate x range.
pub(crate) fn ols_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    Some((mean_y - slope * mean_x, slope))
}

/// Least-squares line `value ~ intercept + slope * rank` over ranks in
/// `[r_lo, r_hi]` (1-based, inclusive).
pub fn fit_rank_range(ranked: &RankedEntries, r_lo: usize, r_hi: usize) -> Result<(f64, f64)> {
    let len = ranked.len();
    if r_lo < 1 || r_hi > len || r_lo >= r_hi {
        return Err(Error::BadRankRange {
            lo: r_lo,
            hi: r_hi,
            len,
        });
    }
    let points: Vec<(f64, f64)> = ranked.entries[r_lo - 1..r_hi]
        .iter()
        .map(|e| (e.rank as f64, e.value))
        .collect();
    ols_fit(&points).ok_or(Error::BadRankRange {
        lo: r_lo,
        hi: r_hi,
        len,
    })
}

/// Mean and population standard deviation of the distinct off-diagonal
/// entries (the diagonal is disregarded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
}

pub fn summary_stats(m: &SimilarityMatrix) -> SummaryStats {
    let n = m.n();
    let mut values = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            values.push(m.get(i, j));
        }
    }
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    SummaryStats {
        mean,
        std: var.sqrt(),
    }
}

/// JSON-facing stats record: {mean, std, n, entries}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StatsReport {
    pub mean: f64,
    pub std: f64,
    /// Matrix dimension.
    pub n: usize,
    /// Number of distinct off-diagonal entries, n(n-1)/2.
    pub entries: usize,
}

impl StatsReport {
    pub fn from_matrix(m: &SimilarityMatrix) -> Self {
        let stats = summary_stats(m);
        let n = m.n();
        StatsReport {
            mean: stats.mean,
            std: stats.std,
            n,
            entries: n * (n - 1) / 2,
        }
    }
}

/// Draws a uniform index in `0..bound` from the ChaCha8 stream by rejection
/// sampling: u64 draws above the largest multiple of `bound` are discarded,
/// the rest are reduced modulo `bound`. Unbiased and platform-independent.
fn uniform_index(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    debug_assert!(bound >= 1);
    // 2^64 mod bound, computed without overflowing.
    let residue = ((u64::MAX % bound) + 1) % bound;
    let limit = u64::MAX - residue;
    loop {
        let draw = rng.next_u64();
        if draw <= limit {
            return draw % bound;
        }
    }
}

/// Null random model: lumps all bags into a single meta-bag, deals the words
/// back out at random and without replacement into new bags of the same
/// totals (a seeded Fisher-Yates permutation of the expanded word sequence).
/// The union multiset is preserved exactly; equal seeds give identical bags.
pub fn shuffle_null_model(bags: &[BagOfWords], seed: u64) -> Result<Vec<BagOfWords>> {
    if bags.is_empty() {
        return Err(Error::TooFewBags { n: 0 });
    }
    let total = bags[0].total();
    for bag in bags {
        if bag.total() != total {
            return Err(Error::UnequalBagTotals {
                label: bag.target().to_string(),
                found: bag.total(),
                expected: total,
            });
        }
    }

    // Expand the meta-bag as vocabulary indices, in deterministic order:
    // bags in input order, words in lexicographic order within each bag.
    let vocab = Vocabulary::from_bags(bags);
    let mut meta: Vec<u32> = Vec::with_capacity((total as usize) * bags.len());
    for bag in bags {
        for (word, &count) in bag.counts() {
            let index = vocab.index_of(word).expect("word is in joint vocabulary") as u32;
            meta.extend(std::iter::repeat_n(index, count as usize));
        }
    }

    // Fisher-Yates over the expanded sequence.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..meta.len()).rev() {
        let j = uniform_index(&mut rng, (i + 1) as u64) as usize;
        meta.swap(i, j);
    }

    // Deal consecutive runs of `total` words into new bags, keeping labels.
    let run = total as usize;
    let mut shuffled = Vec::with_capacity(bags.len());
    for (b, bag) in bags.iter().enumerate() {
        let mut counts: std::collections::BTreeMap<String, u32> = std::collections::BTreeMap::new();
        for &index in &meta[b * run..(b + 1) * run] {
            *counts
                .entry(vocab.word(index as usize).to_string())
                .or_insert(0) += 1;
        }
        shuffled.push(BagOfWords::from_counts(bag.target().to_string(), counts)?);
    }
    Ok(shuffled)
}
