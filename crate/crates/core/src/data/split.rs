//! Stratified train/validation/test assignment.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

const SPLITS: [Split; 3] = [Split::Train, Split::Val, Split::Test];

fn largest_remainder(total: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).filter(|&s| fractions[s] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(counts.iter().sum());
    for s in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[s] += 1;
        left -= 1;
    }
    counts
}

/// Per-class split sizes: within one row of the exact proportion, and summing
/// to the largest-remainder global counts where the two are compatible.
/// A class may end up absent from a small split.
fn allocate(class_sizes: &[usize], fractions: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let target = largest_remainder(total, fractions);
    let exact = |c: usize, s: usize| class_sizes[c] as f64 * fractions[s];

    let mut alloc: Vec<[usize; 3]> = (0..class_sizes.len())
        .map(|c| {
            let mut a = [0usize; 3];
            for (s, slot) in a.iter_mut().enumerate() {
                *slot = exact(c, s).floor() as usize;
            }
            // floor() on values like 28.999999999999996 can overshoot the class size
            while a.iter().sum::<usize>() > class_sizes[c] {
                let s = (0..3).max_by_key(|&s| a[s]).unwrap();
                a[s] -= 1;
            }
            a
        })
        .collect();
    let mut class_left: Vec<usize> = alloc
        .iter()
        .zip(class_sizes)
        .map(|(a, &n)| n - a.iter().sum::<usize>())
        .collect();
    let mut split_left = [0usize; 3];
    for s in 0..3 {
        let used: usize = alloc.iter().map(|a| a[s]).sum();
        split_left[s] = target[s].saturating_sub(used);
    }

    let mut cands: Vec<(usize, usize, f64)> = Vec::new();
    for c in 0..class_sizes.len() {
        for s in 0..3 {
            if fractions[s] > 0.0 {
                cands.push((c, s, exact(c, s) - alloc[c][s] as f64));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    for &(c, s, _) in &cands {
        if class_left[c] > 0 && split_left[s] > 0 {
            alloc[c][s] += 1;
            class_left[c] -= 1;
            split_left[s] -= 1;
        }
    }
    // Anything still unplaced goes to its best-remainder split regardless of global targets,
    // never twice to the same split so the one-row bound holds.
    for &(c, s, _) in &cands {
        if class_left[c] > 0 && alloc[c][s] == exact(c, s).floor() as usize {
            alloc[c][s] += 1;
            class_left[c] -= 1;
        }
    }

    alloc
}

/// Assigns every row to a split, stratified by `labels` (class codes).
///
/// Per-class counts depend only on class sizes and `fractions`; `seed` only
/// decides which rows land where.
pub fn split_rows(labels: &[usize], fractions: [f64; 3], seed: u64) -> Result<Vec<Split>> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) || fractions[0] <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be nonnegative with a positive train share, got {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        members[c].push(i);
    }
    let required = fractions.iter().filter(|f| **f > 0.0).count();
    for (c, rows) in members.iter().enumerate() {
        if !rows.is_empty() && rows.len() < required {
            return Err(Error::ClassTooSmall {
                class: c.to_string(),
                rows: rows.len(),
                required,
            });
        }
    }

    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, &fractions);
    let mut out = vec![Split::Train; labels.len()];
    for (c, rows) in members.iter_mut().enumerate() {
        let mut rng = substream(seed, "split", c as u64);
        rows.shuffle(&mut rng);
        let mut it = rows.iter();
        for (s, &cnt) in SPLITS.iter().zip(&alloc[c]) {
            for &i in it.by_ref().take(cnt) {
                out[i] = *s;
            }
        }
    }
    Ok(out)
}
