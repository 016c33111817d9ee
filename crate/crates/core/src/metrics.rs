//! Evaluation metrics: one-vs-rest AUROC (Mann-Whitney with midranks),
//! support-weighted AUROC, accuracy and confusion counts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// `P(score_pos > score_neg) + ½ P(tie)`, computed from midranks in O(n log n).
pub fn auroc_binary<T: Real>(scores: &[T], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = positives.iter().filter(|&&p| p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Sum of doubled midranks of the positives keeps everything integral.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end; doubled midrank = start + 1 + end.
        let mid2 = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| positives[i]).count() as u128;
        rank_sum2 += mid2 * pos_in_group;
        start = end;
    }
    let p = n_pos as u128;
    // U = Σ ranks - P(P+1)/2, doubled.
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Per-class one-vs-rest AUROC; `None` where a class has no positives or no negatives.
pub fn per_class_auroc<T: Real>(scores: &Matrix<T>, labels: &[usize]) -> Result<Vec<Option<f64>>> {
    if scores.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows for {} labels",
            scores.rows(),
            labels.len()
        )));
    }
    (0..scores.cols())
        .map(|c| {
            let pos: Vec<bool> = labels.iter().map(|&y| y == c).collect();
            match auroc_binary(&scores.column(c), &pos) {
                Ok(v) => Ok(Some(v)),
                Err(Error::SingleClass) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// `Σ_k (support_k / N_eff) · AUROC_k` over classes with both positives and negatives.
pub fn weighted_auroc<T: Real>(scores: &Matrix<T>, labels: &[usize]) -> Result<f64> {
    let per_class = per_class_auroc(scores, labels)?;
    weight_by_support(&per_class, labels)
}

fn weight_by_support(per_class: &[Option<f64>], labels: &[usize]) -> Result<f64> {
    let mut num = 0.0;
    let mut support_total = 0usize;
    for (c, auc) in per_class.iter().enumerate() {
        let support = labels.iter().filter(|&&y| y == c).count();
        match auc {
            Some(a) => {
                num += support as f64 * a;
                support_total += support;
            }
            None if support > 0 => {
                log::warn!("class {c} excluded from weighted AUROC: no negatives");
            }
            None => log::warn!("class {c} excluded from weighted AUROC: no members"),
        }
    }
    if support_total == 0 {
        return Err(Error::SingleClass);
    }
    Ok(num / support_total as f64)
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

/// `confusion[true][predicted]`.
pub fn confusion(predictions: &[usize], labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        m[y][p] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighted_auroc: f64,
    pub per_class_auroc: Vec<Option<f64>>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

impl EvalReport {
    pub fn compute<T: Real>(
        scores: &Matrix<T>,
        predictions: &[usize],
        labels: &[usize],
    ) -> Result<Self> {
        let per_class_auroc = per_class_auroc(scores, labels)?;
        let weighted_auroc = weight_by_support(&per_class_auroc, labels)?;
        Ok(Self {
            weighted_auroc,
            per_class_auroc,
            accuracy: accuracy(predictions, labels),
            confusion: confusion(predictions, labels, scores.cols()),
            n: labels.len(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("report JSON: {e}")))
    }
}

/// Flat `key = value` block.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "weighted_auroc = {:.6}", self.weighted_auroc)?;
        writeln!(f, "accuracy = {:.6}", self.accuracy)?;
        writeln!(f, "n = {}", self.n)?;
        for (c, a) in self.per_class_auroc.iter().enumerate() {
            match a {
                Some(a) => writeln!(f, "auroc[{c}] = {a:.6}")?,
                None => writeln!(f, "auroc[{c}] = NA")?,
            }
        }
        for (c, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(f, "confusion[{c}] = {}", cells.join(" "))?;
        }
        Ok(())
    }
}
