//! Candidate similarity graphs.
//!
//! Each feature yields graphs whose edges join samples with feature values
//! at most `gamma` apart; `gamma` is a quantile of the pairwise absolute
//! differences of that feature. Adjacencies are stored symmetrically
//! normalized with self-loops, `(D+I)^-1/2 (A+I) (D+I)^-1/2`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnEncoding, EncodingMeta};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, substream};
use crate::scalar::Real;

/// Quantile levels of the pairwise-difference distribution used as thresholds.
pub const QUANTILE_LEVELS: [f64; 3] = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0];

pub const DEFAULT_PAIR_CAP: usize = 100_000;
pub const DEFAULT_EDGE_CAP: usize = 50_000_000;

/// Normalized adjacency. Off-diagonal entries are `scale[i] * scale[j]` and
/// the diagonal is `scale[i]^2`, so symmetric entries are bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency<T> {
    layout: Layout,
    /// `1 / sqrt(degree + 1)` per node.
    scale: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// Compressed rows; neighbours ascending, self excluded.
    Csr { row_ptr: Vec<usize>, cols: Vec<u32> },
    /// Threshold graph on one feature: in sorted order every closed
    /// neighbourhood is a contiguous rank window, so `Â z` is a difference
    /// of prefix sums.
    Window {
        order: Vec<u32>,
        rank: Vec<u32>,
        /// Inclusive rank window per sorted rank.
        windows: Vec<(u32, u32)>,
        edges: usize,
    },
}

fn inv_sqrt<T: Real>(degree: usize) -> T {
    T::one() / T::of((degree + 1) as f64).sqrt()
}

impl<T: Real> SparseAdjacency<T> {
    fn from_csr(row_ptr: Vec<usize>, cols: Vec<u32>) -> Self {
        let scale = row_ptr.windows(2).map(|w| inv_sqrt(w[1] - w[0])).collect();
        Self {
            layout: Layout::Csr { row_ptr, cols },
            scale,
        }
    }

    fn from_windows(order: Vec<usize>, windows: Vec<(usize, usize)>) -> Self {
        let n = order.len();
        let mut rank = vec![0u32; n];
        let mut scale = vec![T::zero(); n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
            scale[i] = inv_sqrt(windows[r].1 - windows[r].0);
        }
        let edges = windows.iter().map(|(lo, hi)| hi - lo).sum::<usize>() / 2;
        Self {
            layout: Layout::Window {
                order: order.into_iter().map(|i| i as u32).collect(),
                rank,
                windows: windows.into_iter().map(|(lo, hi)| (lo as u32, hi as u32)).collect(),
                edges,
            },
            scale,
        }
    }

    /// `I` on `n` nodes (no edges).
    pub fn identity(n: usize) -> Self {
        Self::from_csr(vec![0; n + 1], Vec::new())
    }

    pub fn n_nodes(&self) -> usize {
        self.scale.len()
    }

    /// Undirected edges, self-loops excluded.
    pub fn edge_count(&self) -> usize {
        match &self.layout {
            Layout::Csr { cols, .. } => cols.len() / 2,
            Layout::Window { edges, .. } => *edges,
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        match &self.layout {
            Layout::Csr { row_ptr, .. } => row_ptr[i + 1] - row_ptr[i],
            Layout::Window { rank, windows, .. } => {
                let (lo, hi) = windows[rank[i] as usize];
                (hi - lo) as usize
            }
        }
    }

    /// Neighbours of `i` in ascending order, self excluded.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        match &self.layout {
            Layout::Csr { row_ptr, cols } => {
                cols[row_ptr[i]..row_ptr[i + 1]].iter().map(|&j| j as usize).collect()
            }
            Layout::Window {
                order,
                rank,
                windows,
                ..
            } => {
                let (lo, hi) = windows[rank[i] as usize];
                let mut out: Vec<usize> = order[lo as usize..=hi as usize]
                    .iter()
                    .map(|&j| j as usize)
                    .filter(|&j| j != i)
                    .collect();
                out.sort_unstable();
                out
            }
        }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        match &self.layout {
            Layout::Csr { row_ptr, cols } => {
                cols[row_ptr[i]..row_ptr[i + 1]].binary_search(&(j as u32)).is_ok()
            }
            Layout::Window { rank, windows, .. } => {
                let (lo, hi) = windows[rank[i] as usize];
                i != j && (lo..=hi).contains(&rank[j])
            }
        }
    }

    /// Stored entry `Â[i, j]`, zero when absent.
    pub fn value(&self, i: usize, j: usize) -> T {
        if i == j {
            self.scale[i] * self.scale[i]
        } else if self.has_edge(i, j) {
            self.scale[i] * self.scale[j]
        } else {
            T::zero()
        }
    }

    /// Row `i` as `(column, value)` pairs in ascending column order, self-loop included.
    pub fn row(&self, i: usize) -> Vec<(usize, T)> {
        let mut out: Vec<(usize, T)> = self
            .neighbors(i)
            .into_iter()
            .map(|j| (j, self.scale[i] * self.scale[j]))
            .collect();
        let pos = out.partition_point(|(j, _)| *j < i);
        out.insert(pos, (i, self.scale[i] * self.scale[i]));
        out
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_nodes())
            .flat_map(|i| self.neighbors(i).into_iter().filter(move |&j| j > i).map(move |j| (i, j)))
            .collect()
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.n_nodes();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// `Â · z`. Â is symmetric, so this is also the transposed product used in backprop.
    pub fn propagate(&self, z: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(z.rows(), z.cols());
        self.propagate_into(z, &mut out);
        out
    }

    pub fn propagate_into(&self, z: &Matrix<T>, out: &mut Matrix<T>) {
        debug_assert_eq!(z.rows(), self.n_nodes());
        let k = z.cols();
        match &self.layout {
            Layout::Csr { row_ptr, cols } => {
                let mut scaled = z.clone();
                for (i, s) in self.scale.iter().enumerate() {
                    for v in scaled.row_mut(i) {
                        *v *= *s;
                    }
                }
                let src = scaled.as_slice();
                for i in 0..self.n_nodes() {
                    let acc = out.row_mut(i);
                    acc.copy_from_slice(&src[i * k..(i + 1) * k]);
                    for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
                        let r = &src[j as usize * k..(j as usize + 1) * k];
                        for (a, &b) in acc.iter_mut().zip(r) {
                            *a += b;
                        }
                    }
                    let s = self.scale[i];
                    for a in acc.iter_mut() {
                        *a *= s;
                    }
                }
            }
            Layout::Window { order, windows, .. } => {
                // Prefix sums in f64 keep the window differences accurate for f32 too.
                let n = order.len();
                let mut prefix = vec![0.0f64; (n + 1) * k];
                for (r, &i) in order.iter().enumerate() {
                    let i = i as usize;
                    let s = self.scale[i].to_f64_lossy();
                    let (head, tail) = prefix.split_at_mut((r + 1) * k);
                    let prev = &head[r * k..];
                    for ((p, &q), &v) in tail[..k].iter_mut().zip(prev).zip(z.row(i)) {
                        *p = q + s * v.to_f64_lossy();
                    }
                }
                for (r, &i) in order.iter().enumerate() {
                    let i = i as usize;
                    let (lo, hi) = (windows[r].0 as usize, windows[r].1 as usize + 1);
                    let s = self.scale[i].to_f64_lossy();
                    for (c, o) in out.row_mut(i).iter_mut().enumerate() {
                        *o = T::of(s * (prefix[hi * k + c] - prefix[lo * k + c]));
                    }
                }
            }
        }
    }
}

/// Normalizes a symmetric 0/1 edge list: every edge listed in both directions,
/// duplicates ignored.
pub fn normalize<T: Real>(edges: &[(usize, usize)], n: usize) -> Result<SparseAdjacency<T>> {
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "edge ({i}, {j}) outside {n} nodes"
            )));
        }
        if i == j {
            return Err(Error::InvalidArgument(format!("self-loop on node {i}")));
        }
        adj[i].push(j as u32);
    }
    for row in &mut adj {
        row.sort_unstable();
        row.dedup();
    }
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            if adj[j as usize].binary_search(&(i as u32)).is_err() {
                return Err(Error::Asymmetric(i, j as usize));
            }
        }
    }
    Ok(csr_from_rows(adj))
}

fn csr_from_rows<T: Real>(adj: Vec<Vec<u32>>) -> SparseAdjacency<T> {
    let mut row_ptr = Vec::with_capacity(adj.len() + 1);
    row_ptr.push(0);
    let total: usize = adj.iter().map(Vec::len).sum();
    let mut cols = Vec::with_capacity(total);
    for row in adj {
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }
    SparseAdjacency::from_csr(row_ptr, cols)
}

fn check_values<T: Real>(values: &[T]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("feature values must be finite".into()));
    }
    Ok(())
}

/// Sorted order and, per sorted rank, the inclusive rank window of values within `gamma`.
fn threshold_windows<T: Real>(values: &[T], gamma: T) -> (Vec<usize>, Vec<(usize, usize)>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let mut windows = Vec::with_capacity(n);
    let mut lo = 0;
    let mut hi = 0;
    for r in 0..n {
        while sorted[r] - sorted[lo] > gamma {
            lo += 1;
        }
        if hi < r {
            hi = r;
        }
        while hi + 1 < n && sorted[hi + 1] - sorted[r] <= gamma {
            hi += 1;
        }
        windows.push((lo, hi));
    }
    (order, windows)
}

/// Number of undirected edges `build_adjacency` would create, in O(N log N).
pub fn count_edges<T: Real>(values: &[T], gamma: T) -> usize {
    let (_, windows) = threshold_windows(values, gamma);
    windows.iter().map(|(lo, hi)| hi - lo).sum::<usize>() / 2
}

/// Edge `(i, j)`, `i != j`, iff `|values[i] - values[j]| <= gamma`, built by a
/// sorted sweep.
pub fn build_adjacency<T: Real>(values: &[T], gamma: T) -> Result<SparseAdjacency<T>> {
    check_values(values)?;
    if !(gamma >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {gamma}"
        )));
    }
    let n = values.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidArgument(format!("{n} nodes exceed the index width")));
    }
    let (order, windows) = threshold_windows(values, gamma);
    Ok(SparseAdjacency::from_windows(order, windows))
}

/// Nearest-rank (lower) quantile of a sorted slice: the element of 1-based rank `ceil(p * len)`.
pub fn nearest_rank<T: Real>(sorted: &[T], p: f64) -> T {
    let len = sorted.len();
    let rank = (p * len as f64).ceil() as usize;
    sorted[rank.clamp(1, len) - 1]
}

/// Thresholds for one feature: nearest-rank quantiles of the pairwise absolute
/// differences at [`QUANTILE_LEVELS`]. Above `pair_cap` pairs the
/// differences are estimated from `pair_cap` uniformly sampled pairs.
pub fn quantile_thresholds<T: Real>(values: &[T], pair_cap: usize, seed: u64) -> Result<[T; 3]> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 values for pairwise thresholds, got {n}"
        )));
    }
    check_values(values)?;
    let total_pairs = n * (n - 1) / 2;
    let mut diffs: Vec<T> = if total_pairs <= pair_cap.max(1) {
        let mut d = Vec::with_capacity(total_pairs);
        for i in 0..n {
            for j in (i + 1)..n {
                d.push((values[i] - values[j]).abs());
            }
        }
        d
    } else {
        let mut rng = substream(seed, "pairs", 0);
        (0..pair_cap)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (values[i] - values[j]).abs()
            })
            .collect()
    };
    diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(QUANTILE_LEVELS.map(|p| nearest_rank(&diffs, p)))
}

/// Refers to a feature by encoded column name or index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureRef {
    Index(usize),
    Name(String),
}

/// A domain-knowledge graph: edges where the raw feature differs by at most `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertEdge {
    pub feature: FeatureRef,
    /// In raw (un-standardized) feature units.
    pub threshold: f64,
}

impl ExpertEdge {
    pub fn new(feature: FeatureRef, threshold: f64) -> Self {
        Self { feature, threshold }
    }

    /// Feature index and the threshold in standardized units.
    pub fn resolve(&self, meta: &EncodingMeta) -> Result<(usize, f64)> {
        let idx = match &self.feature {
            FeatureRef::Index(i) if *i < meta.columns.len() => *i,
            FeatureRef::Index(i) => return Err(Error::UnknownFeature(i.to_string())),
            FeatureRef::Name(name) => meta
                .feature_index(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?,
        };
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "expert threshold must be nonnegative, got {}",
                self.threshold
            )));
        }
        let gamma = match meta.columns[idx].encoding {
            ColumnEncoding::Numeric { sd, .. } if sd > 0.0 => self.threshold / sd,
            _ => self.threshold,
        };
        Ok((idx, gamma))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateOrigin {
    /// Index into [`QUANTILE_LEVELS`].
    Quantile(usize),
    /// Index into the expert edge list.
    Expert(usize),
}

impl CandidateOrigin {
    pub fn is_expert(self) -> bool {
        matches!(self, CandidateOrigin::Expert(_))
    }
}

#[derive(Debug, Clone)]
pub struct CandidateGraph<T> {
    pub feature: usize,
    pub gamma: T,
    pub origin: CandidateOrigin,
    pub adjacency: SparseAdjacency<T>,
}

impl<T: Real> CandidateGraph<T> {
    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CandidateOptions {
    pub pair_cap: usize,
    /// Candidates with more undirected edges are skipped.
    pub edge_cap: usize,
    pub seed: u64,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        Self {
            pair_cap: DEFAULT_PAIR_CAP,
            edge_cap: DEFAULT_EDGE_CAP,
            seed: 0,
        }
    }
}

/// All `3M` quantile candidates (feature ascending, then gamma ascending),
/// followed by one candidate per expert `(feature, standardized gamma)`.
pub fn enumerate_candidates<T: Real>(
    x: &Matrix<T>,
    expert: &[(usize, T)],
    opts: &CandidateOptions,
) -> Result<Vec<CandidateGraph<T>>> {
    let m = x.cols();
    if m == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    if let Some((j, _)) = expert.iter().find(|(j, _)| *j >= m) {
        return Err(Error::UnknownFeature(j.to_string()));
    }
    let columns: Vec<Vec<T>> = (0..m).map(|j| x.column(j)).collect();
    let thresholds = columns
        .par_iter()
        .enumerate()
        .map(|(j, col)| quantile_thresholds(col, opts.pair_cap, derive_seed(opts.seed, "pairs", j as u64)))
        .collect::<Result<Vec<_>>>()?;

    let mut specs: Vec<(usize, T, CandidateOrigin)> = Vec::with_capacity(3 * m + expert.len());
    for (j, gammas) in thresholds.iter().enumerate() {
        for (q, &g) in gammas.iter().enumerate() {
            specs.push((j, g, CandidateOrigin::Quantile(q)));
        }
    }
    for (e, &(j, g)) in expert.iter().enumerate() {
        specs.push((j, g, CandidateOrigin::Expert(e)));
    }

    let built = specs
        .into_par_iter()
        .map(|(feature, gamma, origin)| {
            let col = &columns[feature];
            let edges = count_edges(col, gamma);
            if edges > opts.edge_cap {
                log::warn!(
                    "skipping candidate feature={feature} gamma={gamma}: {edges} edges exceed cap {}",
                    opts.edge_cap
                );
                return Ok(None);
            }
            let adjacency = build_adjacency(col, gamma)?;
            Ok(Some(CandidateGraph {
                feature,
                gamma,
                origin,
                adjacency,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(built.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn brute_edges(values: &[f64], gamma: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..values.len() {
            for j in (i + 1)..values.len() {
                if (values[i] - values[j]).abs() <= gamma {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn thresholds_small_cases() {
        assert_eq!(quantile_thresholds(&[0.0; 4], 100, 0).unwrap(), [0.0; 3]);
        assert_eq!(
            quantile_thresholds(&[1.0, 2.0, 3.0, 4.0], 100, 0).unwrap(),
            [1.0, 1.0, 1.0]
        );
        assert_eq!(quantile_thresholds(&[0.0, 10.0], 100, 0).unwrap(), [10.0; 3]);
        assert!(quantile_thresholds(&[1.0], 100, 0).is_err());
    }

    #[test]
    fn thresholds_match_sorted_pair_enumeration() {
        // 10 values -> 45 pairs: ranks ceil(45/16)=3, ceil(45/8)=6, ceil(45/4)=12.
        let v: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let mut d: Vec<f64> = brute_edges(&v, f64::INFINITY)
            .iter()
            .map(|&(i, j)| (v[i] - v[j]).abs())
            .collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(
            quantile_thresholds(&v, 1000, 0).unwrap(),
            [d[2], d[5], d[11]]
        );
    }

    #[test]
    fn sampled_thresholds_are_deterministic_and_close() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let a = quantile_thresholds(&v, 20_000, 5).unwrap();
        assert_eq!(a, quantile_thresholds(&v, 20_000, 5).unwrap());
        // Uniform grid: P(|d| <= g) = 2g - g^2.
        for (g, p) in a.iter().zip(QUANTILE_LEVELS) {
            let exact = 1.0 - (1.0 - p).sqrt();
            assert!((g - exact).abs() < 0.01, "{g} vs {exact}");
        }
    }

    #[test]
    fn adjacency_examples() {
        let a = build_adjacency(&[1.0, 2.0, 5.0], 1.5).unwrap();
        assert_eq!(a.edges(), vec![(0, 1)]);
        let a = build_adjacency(&[1.0, 2.0, 5.0], 0.0).unwrap();
        assert_eq!(a.edge_count(), 0);
        assert_eq!(a.to_dense(), Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap());
        let a = build_adjacency(&[0.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(a.edges(), vec![(0, 1), (0, 2), (1, 2)]);
        assert!(build_adjacency(&[0.0, 1.0], -1.0).is_err());
        assert!(build_adjacency(&[0.0, f64::NAN], 1.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let a = normalize::<f64>(&[], 2).unwrap();
        assert_eq!(a.to_dense().as_slice(), &[1.0, 0.0, 0.0, 1.0]);

        let a = normalize::<f64>(&[(0, 1), (1, 0)], 2).unwrap();
        for v in a.to_dense().as_slice() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }

        // Path 0-1-2: degrees (1,2,1).
        let a = normalize::<f64>(&[(0, 1), (1, 0), (1, 2), (2, 1)], 3).unwrap();
        let d = a.to_dense();
        let s6 = 1.0 / 6f64.sqrt();
        let expect = [0.5, s6, 0.0, s6, 1.0 / 3.0, s6, 0.0, s6, 0.5];
        for (v, e) in d.as_slice().iter().zip(expect) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }

        assert!(matches!(normalize::<f64>(&[(0, 1)], 2), Err(Error::Asymmetric(0, 1))));
        assert!(normalize::<f64>(&[(1, 1)], 2).is_err());
    }

    #[test]
    fn propagate_matches_dense_product() {
        let a = build_adjacency(&[0.0, 0.3, 0.5, 2.0, 2.2], 0.6).unwrap();
        let z = Matrix::from_rows(&[
            vec![1.0, -1.0],
            vec![0.5, 2.0],
            vec![0.0, 1.0],
            vec![3.0, 0.0],
            vec![-2.0, 0.25],
        ])
        .unwrap();
        let dense = a.to_dense();
        let got = a.propagate(&z);
        for i in 0..5 {
            for c in 0..2 {
                let want: f64 = (0..5).map(|j| dense.get(i, j) * z.get(j, c)).sum();
                assert_abs_diff_eq!(got.get(i, c), want, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn candidate_enumeration_order_and_counts() {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, 1.0]]).unwrap();
        let c = enumerate_candidates(&x, &[], &CandidateOptions::default()).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.windows(2).all(|w| (w[0].feature, w[0].gamma) <= (w[1].feature, w[1].gamma)));
        // Constant feature: three identical complete graphs.
        for cand in &c[3..] {
            assert_eq!(cand.gamma, 0.0);
            assert_eq!(cand.edge_count(), 3);
        }

        let c = enumerate_candidates(&x, &[(0, 1.5)], &CandidateOptions::default()).unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c[6].origin, CandidateOrigin::Expert(0));
        assert_eq!(c[6].adjacency.edges(), vec![(0, 1)]);
        assert!(enumerate_candidates(&x, &[(2, 1.0)], &CandidateOptions::default()).is_err());

        let capped = CandidateOptions {
            edge_cap: 2,
            ..CandidateOptions::default()
        };
        let c = enumerate_candidates(&x, &[], &capped).unwrap();
        assert!(c.iter().all(|g| g.feature == 0));
    }

    #[test]
    fn single_precision_graphs() {
        let a = build_adjacency(&[0.0f32, 0.5, 1.0], 0.5).unwrap();
        assert_eq!(a.edges(), vec![(0, 1), (1, 2)]);
        assert_abs_diff_eq!(a.value(1, 1), 1.0f32 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn window_propagation_matches_compressed_rows() {
        let mut rng = substream(4, "test", 0);
        for _ in 0..20 {
            let n = rand::Rng::random_range(&mut rng, 1..60);
            let values: Vec<f64> = (0..n).map(|_| (rand::Rng::random_range(&mut rng, 0..12) as f64) * 0.25).collect();
            let gamma = rand::Rng::random_range(&mut rng, 0.0..1.5);
            let window = build_adjacency(&values, gamma).unwrap();
            let both: Vec<(usize, usize)> = window.edges().into_iter().flat_map(|(i, j)| [(i, j), (j, i)]).collect();
            let csr = normalize::<f64>(&both, n).unwrap();
            assert_eq!(window.to_dense(), csr.to_dense());
            let z = Matrix::from_vec(n, 3, (0..3 * n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect()).unwrap();
            let (a, b) = (window.propagate(&z), csr.propagate(&z));
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    proptest! {
        #[test]
        fn sweep_equals_brute_force(
            values in prop::collection::vec(prop_oneof![-5.0f64..5.0, (-3i32..3).prop_map(f64::from)], 1..60),
            gamma in 0.0f64..3.0,
        ) {
            let a = build_adjacency(&values, gamma).unwrap();
            prop_assert_eq!(a.edges(), brute_edges(&values, gamma));
            prop_assert_eq!(count_edges(&values, gamma), a.edge_count());
        }

        #[test]
        fn normalization_eigen_relation(
            values in prop::collection::vec(-3.0f64..3.0, 1..40),
            gamma in 0.0f64..2.0,
        ) {
            let a = build_adjacency(&values, gamma).unwrap();
            let n = a.n_nodes();
            for i in 0..n {
                let lhs: f64 = a.row(i).iter().map(|&(j, v)| v * ((a.degree(j) + 1) as f64).sqrt()).sum();
                prop_assert!((lhs - ((a.degree(i) + 1) as f64).sqrt()).abs() <= 1e-9);
                for j in 0..n {
                    prop_assert_eq!(a.value(i, j).to_bits(), a.value(j, i).to_bits());
                }
            }
        }
    }
}
