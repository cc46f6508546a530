//! Agglomerative hierarchical clustering.
//!
//! Items start as singleton clusters and the closest pair of active clusters is
//! merged until one cluster remains. Inter-cluster distances are maintained with
//! Lance-Williams style updates over a dense active-cluster table, which keeps the
//! implementation at O(n³) in the worst case. That is plenty for universes of a few
//! hundred companies.
//!
//! Distances are plain Euclidean over raw feature values; no scaling is applied.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use thiserror::Error;

/// Errors raised while building or cutting a merge tree.
#[derive(Debug, Error, PartialEq)]
pub enum HcaError {
    #[error("feature row {row} has dimension {actual}, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("feature row {row} column {column} is not finite")]
    NonFinite { row: usize, column: usize },
    #[error("need at least 2 items to cluster, got {0}")]
    TooFewItems(usize),
    #[error("cut arity {k} out of range 1..={n}")]
    CutOutOfRange { k: usize, n: usize },
    #[error("unknown linkage method {0:?}")]
    UnknownLinkage(String),
}

/// Rule that turns pairwise point distances into a distance between clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [
        Linkage::Single,
        Linkage::Complete,
        Linkage::Average,
        Linkage::Ward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Linkage {
    type Err = HcaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "slink" => Ok(Linkage::Single),
            "complete" | "clink" => Ok(Linkage::Complete),
            "average" | "alc" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            other => Err(HcaError::UnknownLinkage(other.to_string())),
        }
    }
}

/// Row-major matrix of item feature vectors, all of one dimension and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, HcaError> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(HcaError::DimensionMismatch {
                    row: i,
                    expected: dim,
                    actual: row.len(),
                });
            }
            if let Some(column) = row.iter().position(|v| !v.is_finite()) {
                return Err(HcaError::NonFinite { row: i, column });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Copy with rows reordered so that new row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Build from a full square matrix. Only the upper triangle is read; the
    /// lower triangle is mirrored from it.
    pub fn from_square(n: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), n * n, "square matrix must have n*n entries");
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = values[i * n + j];
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

/// Pairwise Euclidean distances. Each pair is summed in column order, so the
/// result is bit-reproducible.
pub fn euclidean_distances(m: &FeatureMatrix) -> DistanceMatrix {
    let n = m.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let a = m.row(i);
        for j in (i + 1)..n {
            let b = m.row(j);
            let mut acc = 0.0;
            for k in 0..m.dim() {
                let diff = a[k] - b[k];
                acc += diff * diff;
            }
            let v = acc.sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    DistanceMatrix { n, d }
}

/// One agglomeration step: clusters `left` and `right` (with `left < right`)
/// merged into `new_id` at linkage distance `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub new_id: usize,
    pub size: usize,
}

/// Dendrogram over `n_leaves` items. Leaves are ids `0..n`; merge `t` creates
/// cluster id `n + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTree {
    n_leaves: usize,
    merges: Vec<Merge>,
    linkage: Linkage,
}

impl MergeTree {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    /// Dendrogram dump as `step,left_id,right_id,height,new_id`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,left_id,right_id,height,new_id")?;
        for (step, m) in self.merges.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                step, m.left, m.right, m.height, m.new_id
            )?;
        }
        Ok(())
    }
}

/// Agglomerate all items of `d` under `linkage`.
///
/// At each step the active pair with the smallest linkage distance is merged.
/// Exact ties go to the pair with the lexicographically smallest
/// `(min id, max id)`. Ward distances between singletons are seeded with the
/// raw Euclidean distances and updated with
/// `d(C,A)² = ((|A|+|X|)·d(A,X)² + (|A|+|Y|)·d(A,Y)² − |A|·d(X,Y)²) / N`.
pub fn build_merge_tree(d: &DistanceMatrix, linkage: Linkage) -> Result<MergeTree, HcaError> {
    let n = d.n();
    if n < 2 {
        return Err(HcaError::TooFewItems(n));
    }

    // Slot-indexed working copy; a merged cluster reuses the lower slot.
    let mut dist = d.d.clone();
    let mut active = vec![true; n];
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);

    for t in 0..(n - 1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let v = dist[i * n + j];
                let (lo, hi) = if ids[i] < ids[j] {
                    (ids[i], ids[j])
                } else {
                    (ids[j], ids[i])
                };
                let better = match best {
                    None => true,
                    Some((bv, _, _, blo, bhi)) => v < bv || (v == bv && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((v, i, j, lo, hi));
                }
            }
        }
        let (height, x, y, lo, hi) = best.expect("at least two active clusters");
        let (nx, ny) = (sizes[x] as f64, sizes[y] as f64);
        let dxy = dist[x * n + y];

        for a in 0..n {
            if !active[a] || a == x || a == y {
                continue;
            }
            let dax = dist[a * n + x];
            let day = dist[a * n + y];
            let updated = match linkage {
                Linkage::Single => dax.min(day),
                Linkage::Complete => dax.max(day),
                Linkage::Average => (nx * dax + ny * day) / (nx + ny),
                Linkage::Ward => {
                    let na = sizes[a] as f64;
                    let total = na + nx + ny;
                    let sq = ((na + nx) * dax * dax + (na + ny) * day * day - na * dxy * dxy)
                        / total;
                    sq.max(0.0).sqrt()
                }
            };
            dist[a * n + x] = updated;
            dist[x * n + a] = updated;
        }

        active[y] = false;
        sizes[x] += sizes[y];
        ids[x] = n + t;
        merges.push(Merge {
            left: lo,
            right: hi,
            height,
            new_id: n + t,
            size: sizes[x],
        });
    }

    Ok(MergeTree {
        n_leaves: n,
        merges,
        linkage,
    })
}

/// Partition the leaves into `k` clusters by applying the first `n − k` merges.
///
/// Clusters are returned ordered by their smallest leaf id, each with sorted
/// leaf ids.
pub fn cut(tree: &MergeTree, k: usize) -> Result<Vec<Vec<usize>>, HcaError> {
    let n = tree.n_leaves;
    if k == 0 || k > n {
        return Err(HcaError::CutOutOfRange { k, n });
    }
    // Union-find over cluster ids 0..2n-1.
    let mut parent: Vec<usize> = (0..(2 * n - 1)).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in &tree.merges[..n - k] {
        parent[m.left] = m.new_id;
        parent[m.right] = m.new_id;
    }

    let mut root_to_cluster: Vec<Option<usize>> = vec![None; 2 * n - 1];
    let mut clusters: Vec<Vec<usize>> = Vec::with_capacity(k);
    for leaf in 0..n {
        let r = find(&mut parent, leaf);
        match root_to_cluster[r] {
            Some(c) => clusters[c].push(leaf),
            None => {
                root_to_cluster[r] = Some(clusters.len());
                clusters.push(vec![leaf]);
            }
        }
    }
    debug_assert_eq!(clusters.len(), k);
    Ok(clusters)
}
