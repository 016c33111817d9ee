//! Synthetic cohorts with planted inter-sample structure.
//!
//! One column `e` is uniform noise on its own, but labels are smooth along
//! it: each row's label is (with probability `rho`) the majority of a random
//! seed labelling over the `ceil(n/20)` rows nearest in `e`. The remaining
//! columns are Gaussians whose class means sit 0.5 sd apart.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::table::{Column, RawTable};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticParams {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub table: RawTable,
    pub labels: Vec<String>,
    /// Index (and name) of the planted edge column.
    pub edge_column: usize,
}

impl SyntheticCohort {
    pub fn edge_name(&self) -> &str {
        &self.table.names()[self.edge_column]
    }
}

pub const CLASS_MEAN_GAP: f64 = 0.5;

pub fn class_name(c: usize) -> String {
    format!("c{c}")
}

/// Majority (lowest class on ties) of `seed_labels` over a window of `width`
/// rows around every rank of the sorted order.
fn window_majority(order: &[usize], seed_labels: &[usize], k: usize, width: usize) -> Vec<usize> {
    let n = order.len();
    let mut prefix = vec![0usize; (n + 1) * k];
    for (r, &i) in order.iter().enumerate() {
        for c in 0..k {
            prefix[(r + 1) * k + c] = prefix[r * k + c] + usize::from(seed_labels[i] == c);
        }
    }
    let mut out = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        let lo = r.saturating_sub(width / 2).min(n - width);
        let hi = lo + width;
        let mut best = 0;
        let mut best_count = 0;
        for c in 0..k {
            let cnt = prefix[hi * k + c] - prefix[lo * k + c];
            if cnt > best_count {
                best = c;
                best_count = cnt;
            }
        }
        out[i] = best;
    }
    out
}

pub fn gen_synthetic(params: SyntheticParams) -> Result<SyntheticCohort> {
    let SyntheticParams { n, m, k, rho, seed } = params;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 classes, got {k}")));
    }
    if n < 10 * k {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 rows per class ({} for k={k}), got {n}",
            10 * k
        )));
    }
    if m < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 features, got {m}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
    }

    let mut rng = substream(seed, "synth", 0);
    let edge_column = rng.random_range(0..m);
    let e: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let seed_labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e[a].total_cmp(&e[b]).then(a.cmp(&b)));
    let width = n.div_ceil(20);
    let majority = window_majority(&order, &seed_labels, k, width);

    let y: Vec<usize> = majority
        .iter()
        .map(|&maj| {
            let keep = rng.random::<f64>() < rho;
            let noise = rng.random_range(0..k);
            if keep {
                maj
            } else {
                noise
            }
        })
        .collect();

    let mut names = Vec::with_capacity(m);
    let mut columns = Vec::with_capacity(m);
    let mut noise_idx = 0;
    for j in 0..m {
        names.push(format!("f{j}"));
        if j == edge_column {
            columns.push(Column::Numeric(e.iter().map(|&v| Some(v)).collect()));
        } else {
            let col = y
                .iter()
                .map(|&c| {
                    let mean = CLASS_MEAN_GAP * ((c + noise_idx) % k) as f64;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Some(mean + z)
                })
                .collect();
            columns.push(Column::Numeric(col));
            noise_idx += 1;
        }
    }
    let table = RawTable::new(names, columns)?;
    Ok(SyntheticCohort {
        table,
        labels: y.into_iter().map(class_name).collect(),
        edge_column,
    })
}
