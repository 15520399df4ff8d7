//! Ward's minimum-variance agglomerative clustering over the similarity
//! structure: similarity-to-distance conversion, full dendrogram with merge
//! costs, k-cuts, merge traces and Newick export.
//!
//! Merge-cost convention: the cost recorded for joining clusters A and B is
//! the increase in total within-cluster sum of squares,
//! `dESS = (n_A n_B / (n_A + n_B)) ||c_A - c_B||^2`, which for singletons
//! equals `d^2 / 2`. Inter-cluster distances are maintained with the
//! Lance-Williams recurrence for Ward's method, so the cost stays `d^2 / 2`
//! at every step.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Matrix;
use crate::sim::SimilarityMatrix;

/// Similarity-to-distance conversion applied before clustering.
///
/// `Sqrt2` maps `S` to `sqrt(2 (1 - S))`, the true Euclidean distance
/// between the unit-normalized context vectors, which makes Ward's variance
/// objective exact. `OneMinus` (`1 - S`) is a simpler monotone alternative;
/// any strictly decreasing transform preserves the first merge but later
/// merges can differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    #[default]
    Sqrt2,
    OneMinus,
}

impl FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqrt2" => Ok(DistanceKind::Sqrt2),
            "one-minus" => Ok(DistanceKind::OneMinus),
            other => Err(format!(
                "unknown distance kind {other:?} (expected sqrt2 or one-minus)"
            )),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistanceKind::Sqrt2 => write!(f, "sqrt2"),
            DistanceKind::OneMinus => write!(f, "one-minus"),
        }
    }
}

/// Symmetric nonnegative distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    mat: Matrix,
}

impl DistanceMatrix {
    /// Builds from explicit values, validating symmetry, nonnegativity and a
    /// zero diagonal.
    pub fn new(labels: Vec<String>, mat: Matrix) -> Result<Self> {
        if labels.len() != mat.n() {
            return Err(Error::DimensionMismatch {
                left: labels.len(),
                right: mat.n(),
            });
        }
        mat.require_symmetric(1e-12)?;
        for i in 0..mat.n() {
            if mat.get(i, i) != 0.0 {
                return Err(Error::BadMatrixValue {
                    row: i,
                    col: i,
                    value: mat.get(i, i),
                    expected: "zero diagonal",
                });
            }
            for j in 0..mat.n() {
                if mat.get(i, j) < 0.0 {
                    return Err(Error::BadMatrixValue {
                        row: i,
                        col: j,
                        value: mat.get(i, j),
                        expected: "nonnegative distance",
                    });
                }
            }
        }
        Ok(DistanceMatrix { labels, mat })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.mat.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }
}

/// Converts a normalized similarity matrix to distances. Entries outside
/// [0, 1] by more than 1e-12 are rejected; closer ones are clamped.
pub fn similarity_to_distance(s: &SimilarityMatrix, kind: DistanceKind) -> Result<DistanceMatrix> {
    let n = s.n();
    let mut mat = Matrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let value = s.get(i, j);
            if !(-1e-12..=1.0 + 1e-12).contains(&value) {
                return Err(Error::SimilarityOutOfRange {
                    row: i,
                    col: j,
                    value,
                });
            }
            let clamped = value.clamp(0.0, 1.0);
            let d = match kind {
                DistanceKind::Sqrt2 => (2.0 * (1.0 - clamped)).sqrt(),
                DistanceKind::OneMinus => 1.0 - clamped,
            };
            mat.set_sym(i, j, d);
        }
    }
    DistanceMatrix::new(s.labels().to_vec(), mat)
}

/// One agglomeration. Cluster ids: leaves are `0..n-1`, the cluster created
/// at step s (1-based) is `n - 1 + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub step: usize,
    pub left: usize,
    pub right: usize,
    /// Ward merge cost (increase in within-cluster sum of squares).
    pub cost: f64,
    /// Member count of the new cluster.
    pub size: usize,
}

/// Full Ward merge history over the leaf labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<MergeStep>,
}

impl Dendrogram {
    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[MergeStep] {
        &self.merges
    }

    /// Writes one MergeStep JSON record per line.
    pub fn write_merges_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::write(path, e))?;
        let mut out = BufWriter::new(file);
        for step in &self.merges {
            let line = serde_json::to_string(step).expect("merge step serializes");
            writeln!(out, "{line}").map_err(|e| Error::write(path, e))?;
        }
        out.flush().map_err(|e| Error::write(path, e))
    }
}

/// Candidate ordering: cost first, then the (smaller id, larger id) pair so
/// exact ties resolve deterministically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MergeKey {
    cost2: f64,
    lo: usize,
    hi: usize,
}

impl MergeKey {
    fn better_than(&self, other: &MergeKey) -> bool {
        match self.cost2.total_cmp(&other.cost2) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => (self.lo, self.hi) < (other.lo, other.hi),
        }
    }
}

/// Ward agglomeration from a distance matrix. Starts from singletons and
/// repeatedly merges the pair with minimal Ward cost, updating inter-cluster
/// distances with the Lance-Williams recurrence. Nearest-neighbor arrays
/// keep the scan O(n^2)-ish; no priority queue is needed at this scale.
pub fn ward_linkage(d: &DistanceMatrix) -> Result<Dendrogram> {
    let n = d.n();
    if n < 2 {
        return Err(Error::TooFewObjects { n });
    }

    // Squared distances between active slots. Slot i initially holds leaf i;
    // a merge collapses into the lower slot.
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            d2[i * n + j] = d.get(i, j) * d.get(i, j);
        }
    }
    let mut active = vec![true; n];
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];

    let key_of = |d2: &[f64], cluster_id: &[usize], a: usize, b: usize| -> MergeKey {
        let (ida, idb) = (cluster_id[a], cluster_id[b]);
        MergeKey {
            cost2: d2[a * n + b],
            lo: ida.min(idb),
            hi: ida.max(idb),
        }
    };

    // Best partner per active slot.
    let compute_nn = |d2: &[f64],
                      cluster_id: &[usize],
                      active: &[bool],
                      slot: usize|
     -> Option<(usize, MergeKey)> {
        let mut best: Option<(usize, MergeKey)> = None;
        for (other, &live) in active.iter().enumerate() {
            if other == slot || !live {
                continue;
            }
            let key = key_of(d2, cluster_id, slot, other);
            if best.as_ref().is_none_or(|(_, b)| key.better_than(b)) {
                best = Some((other, key));
            }
        }
        best
    };

    let mut nn: Vec<Option<(usize, MergeKey)>> = (0..n)
        .map(|slot| compute_nn(&d2, &cluster_id, &active, slot))
        .collect();

    let mut merges = Vec::with_capacity(n - 1);
    for step in 1..n {
        // Global minimum over the per-slot nearest neighbors.
        let mut best_slot = None;
        for slot in 0..n {
            if !active[slot] {
                continue;
            }
            let (_, key) = nn[slot].expect("active slot has a neighbor");
            if best_slot
                .map(|(_, best_key): (usize, MergeKey)| key.better_than(&best_key))
                .unwrap_or(true)
            {
                best_slot = Some((slot, key));
            }
        }
        let (slot_a, _) = best_slot.expect("at least two active slots");
        let slot_b = nn[slot_a].expect("active slot has a neighbor").0;
        // Keep the slot whose cluster id is smaller.
        let (si, sj) = if cluster_id[slot_a] <= cluster_id[slot_b] {
            (slot_a, slot_b)
        } else {
            (slot_b, slot_a)
        };

        let (left, right) = (cluster_id[si], cluster_id[sj]);
        let dij2 = d2[si * n + sj];
        let (ni, nj) = (size[si], size[sj]);
        merges.push(MergeStep {
            step,
            left,
            right,
            cost: dij2 / 2.0,
            size: ni + nj,
        });

        // Lance-Williams update for Ward: distances from every other cluster
        // to the merged cluster, written into slot si.
        for k in 0..n {
            if !active[k] || k == si || k == sj {
                continue;
            }
            let nk = size[k];
            let dki = d2[k * n + si];
            let dkj = d2[k * n + sj];
            let updated = ((ni + nk) as f64 * dki + (nj + nk) as f64 * dkj
                - nk as f64 * dij2)
                / (ni + nj + nk) as f64;
            d2[k * n + si] = updated;
            d2[si * n + k] = updated;
        }
        active[sj] = false;
        nn[sj] = None;
        size[si] = ni + nj;
        cluster_id[si] = n - 1 + step;

        // Repair nearest neighbors: pointers into the merged slots are stale;
        // everyone else may at most be beaten by the new cluster.
        for k in 0..n {
            if !active[k] || k == si {
                continue;
            }
            let stale = match nn[k] {
                Some((target, _)) => target == si || target == sj,
                None => true,
            };
            if stale {
                nn[k] = compute_nn(&d2, &cluster_id, &active, k);
            } else if let Some((_, current)) = nn[k] {
                let candidate = key_of(&d2, &cluster_id, k, si);
                if candidate.better_than(&current) {
                    nn[k] = Some((si, candidate));
                }
            }
        }
        if step < n - 1 {
            nn[si] = compute_nn(&d2, &cluster_id, &active, si);
        }
    }

    Ok(Dendrogram {
        leaves: d.labels().to_vec(),
        merges,
    })
}

/// Flat partition from cutting a dendrogram at k clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub k: usize,
    /// Leaf index -> cluster index (0-based, ordered by smallest member label).
    assignment: Vec<usize>,
    /// Cluster index -> sorted member labels.
    members: Vec<Vec<String>>,
}

impl Partition {
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self) -> &[Vec<String>] {
        &self.members
    }

    /// 1-based cluster id -> sorted member list, for the JSON report.
    pub fn to_json_map(&self) -> std::collections::BTreeMap<usize, Vec<String>> {
        self.members
            .iter()
            .enumerate()
            .map(|(idx, members)| (idx + 1, members.clone()))
            .collect()
    }
}

/// Undoes the last k-1 merges: the partition left after the first n-k
/// agglomerations. Clusters are ordered by their smallest member label.
pub fn cut(dend: &Dendrogram, k: usize) -> Result<Partition> {
    let n = dend.leaves.len();
    if k < 1 || k > n {
        return Err(Error::ClusterCountOutOfRange { k, n });
    }
    // members_by_id[id] = Some(leaf indices) while the cluster is live.
    let mut members_by_id: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    members_by_id.resize(2 * n - 1, None);
    for merge in &dend.merges[..n - k] {
        let left = members_by_id[merge.left].take().expect("left cluster live");
        let mut right = members_by_id[merge.right].take().expect("right cluster live");
        let mut joined = left;
        joined.append(&mut right);
        members_by_id[n - 1 + merge.step] = Some(joined);
    }

    let mut clusters: Vec<Vec<usize>> = members_by_id.into_iter().flatten().collect();
    debug_assert_eq!(clusters.len(), k);
    for cluster in &mut clusters {
        cluster.sort_by(|&a, &b| dend.leaves[a].cmp(&dend.leaves[b]));
    }
    clusters.sort_by(|a, b| dend.leaves[a[0]].cmp(&dend.leaves[b[0]]));

    let mut assignment = vec![0usize; n];
    let mut members = Vec::with_capacity(k);
    for (idx, cluster) in clusters.iter().enumerate() {
        for &leaf in cluster {
            assignment[leaf] = idx;
        }
        members.push(cluster.iter().map(|&i| dend.leaves[i].clone()).collect());
    }
    Ok(Partition {
        k,
        assignment,
        members,
    })
}

/// One merge with human-readable members of both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeTraceEntry {
    pub step: usize,
    pub cost: f64,
    pub left_members: Vec<String>,
    pub right_members: Vec<String>,
}

/// The first t merges with member labels (t is clamped to n-1).
pub fn merge_trace(dend: &Dendrogram, t: usize) -> Vec<MergeTraceEntry> {
    let n = dend.leaves.len();
    let t = t.min(dend.merges.len());
    let mut members_by_id: Vec<Option<Vec<String>>> = dend
        .leaves
        .iter()
        .map(|label| Some(vec![label.clone()]))
        .collect();
    members_by_id.resize(2 * n - 1, None);

    let mut trace = Vec::with_capacity(t);
    for merge in &dend.merges[..t] {
        let left = members_by_id[merge.left].take().expect("left cluster live");
        let right = members_by_id[merge.right].take().expect("right cluster live");
        let mut left_sorted = left.clone();
        let mut right_sorted = right.clone();
        left_sorted.sort();
        right_sorted.sort();
        trace.push(MergeTraceEntry {
            step: merge.step,
            cost: merge.cost,
            left_members: left_sorted,
            right_members: right_sorted,
        });
        let mut joined = left;
        joined.extend(right);
        members_by_id[n - 1 + merge.step] = Some(joined);
    }
    trace
}

/// Newick serialization with node heights equal to merge costs: each branch
/// length is the parent's cost minus the child's (leaves sit at height 0).
/// Leaf names are the target labels, assumed to be plain single tokens.
pub fn to_newick(dend: &Dendrogram) -> String {
    let n = dend.leaves.len();
    fn subtree(dend: &Dendrogram, id: usize, n: usize) -> (String, f64) {
        if id < n {
            (dend.leaves[id].clone(), 0.0)
        } else {
            let merge = &dend.merges[id - n];
            let (left_text, left_height) = subtree(dend, merge.left, n);
            let (right_text, right_height) = subtree(dend, merge.right, n);
            let text = format!(
                "({}:{},{}:{})",
                left_text,
                merge.cost - left_height,
                right_text,
                merge.cost - right_height
            );
            (text, merge.cost)
        }
    }
    let root = 2 * n - 2;
    let (text, _) = subtree(dend, root, n);
    format!("{text};")
}
