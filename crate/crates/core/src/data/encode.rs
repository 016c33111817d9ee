//! Feature encoding: median imputation, train-split z-scoring, and
//! first-appearance categorical codes.

use std::collections::{BTreeSet, HashMap};

use super::split::{split_rows, Split};
use super::table::{Column, ColumnKind, RawTable};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnEncoding {
    /// Missing cells take `impute`; the value is then mapped to
    /// `(v - mean) / sd`, or to zero when `sd == 0`.
    Numeric { impute: f64, mean: f64, sd: f64 },
    /// Code = index into `categories`; `None` is the missing category.
    /// Unseen values map to `categories.len()`.
    Categorical { categories: Vec<Option<String>> },
}

impl ColumnEncoding {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnEncoding::Numeric { .. } => ColumnKind::Numeric,
            ColumnEncoding::Categorical { .. } => ColumnKind::Categorical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub encoding: ColumnEncoding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMeta {
    pub columns: Vec<ColumnMeta>,
    /// Class names; the label code is the index.
    pub classes: Vec<String>,
}

impl EncodingMeta {
    pub fn feature_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Column kinds as CSV loading hints, so inference reads columns the way they were fitted.
    pub fn kind_hints(&self) -> HashMap<String, ColumnKind> {
        self.columns
            .iter()
            .map(|c| (c.name.clone(), c.encoding.kind()))
            .collect()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Maps text labels to codes; fails on labels unseen at fit time.
    pub fn encode_labels(&self, labels: &[String]) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        labels
            .iter()
            .map(|l| {
                index
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(l.clone()))
            })
            .collect()
    }
}

/// Encoded, standardized cohort ready for fitting.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix<f64>,
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub split: Vec<Split>,
    pub meta: EncodingMeta,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn mask(&self, which: Split) -> Vec<bool> {
        self.split.iter().map(|s| *s == which).collect()
    }
}

/// Sorted distinct labels and the code of every row.
pub fn code_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let codes = labels.iter().map(|l| index[l.as_str()]).collect();
    (classes, codes)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn fit_column(name: &str, column: &Column, train: &[bool]) -> Result<ColumnEncoding> {
    match column {
        Column::Numeric(values) => {
            let mut observed: Vec<f64> = values
                .iter()
                .zip(train)
                .filter_map(|(v, &t)| if t { *v } else { None })
                .collect();
            if observed.is_empty() {
                return Err(Error::AllMissing(name.to_owned()));
            }
            let impute = median(&mut observed);
            let imputed: Vec<f64> = values
                .iter()
                .zip(train)
                .filter(|(_, &t)| t)
                .map(|(v, _)| v.unwrap_or(impute))
                .collect();
            let n = imputed.len() as f64;
            let mean = imputed.iter().sum::<f64>() / n;
            let sd = if imputed.len() < 2 {
                0.0
            } else {
                let ss: f64 = imputed.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n - 1.0)).sqrt()
            };
            // Relative guard: float noise on a constant column must not become a unit-variance column.
            let sd = if sd <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { sd };
            Ok(ColumnEncoding::Numeric { impute, mean, sd })
        }
        Column::Categorical(values) => {
            if !values.iter().zip(train).any(|(v, &t)| t && v.is_some()) {
                return Err(Error::AllMissing(name.to_owned()));
            }
            let mut categories: Vec<Option<String>> = Vec::new();
            for (v, _) in values.iter().zip(train).filter(|(_, &t)| t) {
                if !categories.contains(v) {
                    categories.push(v.clone());
                }
            }
            Ok(ColumnEncoding::Categorical { categories })
        }
    }
}

fn encode_column(column: &Column, encoding: &ColumnEncoding, out: &mut [f64]) -> Result<()> {
    match (column, encoding) {
        (Column::Numeric(values), ColumnEncoding::Numeric { impute, mean, sd }) => {
            for (o, v) in out.iter_mut().zip(values) {
                let v = v.unwrap_or(*impute);
                *o = if *sd == 0.0 { 0.0 } else { (v - mean) / sd };
            }
            Ok(())
        }
        (Column::Categorical(values), ColumnEncoding::Categorical { categories }) => {
            let index: HashMap<Option<&str>, usize> = categories
                .iter()
                .enumerate()
                .map(|(i, c)| (c.as_deref(), i))
                .collect();
            for (o, v) in out.iter_mut().zip(values) {
                let code = index
                    .get(&v.as_deref())
                    .copied()
                    .unwrap_or(categories.len());
                *o = code as f64;
            }
            Ok(())
        }
        (Column::Numeric(_), ColumnEncoding::Categorical { .. }) => Err(Error::KindMismatch {
            column: String::new(),
            expected: "categorical",
        }),
        (Column::Categorical(_), ColumnEncoding::Numeric { .. }) => Err(Error::KindMismatch {
            column: String::new(),
            expected: "numeric",
        }),
    }
}

/// Fits the encoder on the train rows of `table` and encodes every row.
pub fn fit_encoder(table: &RawTable, labels: &[String], split: &[Split]) -> Result<Dataset> {
    let n = table.n_rows();
    if labels.len() != n || split.len() != n {
        return Err(Error::Shape(format!(
            "{n} rows, {} labels, {} split tags",
            labels.len(),
            split.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyTable);
    }
    let train: Vec<bool> = split.iter().map(|s| *s == Split::Train).collect();
    if !train.iter().any(|&t| t) {
        return Err(Error::InvalidArgument("split has no train rows".into()));
    }

    let (classes, y) = code_labels(labels);
    let mut seen = vec![false; classes.len()];
    for (&c, &t) in y.iter().zip(&train) {
        if t {
            seen[c] = true;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::ClassMissingFromTrain(classes[missing].clone()));
    }

    let columns = table
        .names()
        .iter()
        .zip(table.columns())
        .map(|(name, col)| {
            Ok(ColumnMeta {
                name: name.clone(),
                encoding: fit_column(name, col, &train)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = EncodingMeta { columns, classes };
    let x = apply_encoder(table, &meta)?;
    Ok(Dataset {
        x,
        y,
        n_classes: meta.n_classes(),
        split: split.to_vec(),
        meta,
    })
}

/// Encodes `table` with stored statistics; columns are matched by name.
pub fn apply_encoder(table: &RawTable, meta: &EncodingMeta) -> Result<Matrix<f64>> {
    let missing: Vec<String> = meta
        .columns
        .iter()
        .filter(|c| table.column(&c.name).is_none())
        .map(|c| c.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let n = table.n_rows();
    let m = meta.columns.len();
    let mut cols = vec![0.0; n * m];
    for (j, cm) in meta.columns.iter().enumerate() {
        let column = table.column(&cm.name).expect("checked above");
        encode_column(column, &cm.encoding, &mut cols[j * n..(j + 1) * n]).map_err(|e| match e {
            Error::KindMismatch { expected, .. } => Error::KindMismatch {
                column: cm.name.clone(),
                expected,
            },
            other => other,
        })?;
    }
    let mut data = vec![0.0; n * m];
    for j in 0..m {
        for i in 0..n {
            data[i * m + j] = cols[j * n + i];
        }
    }
    Matrix::from_vec(n, m, data)
}

/// Codes `labels`, draws a stratified split and fits the encoder on it.
pub fn prepare_dataset(table: &RawTable, labels: &[String], fractions: [f64; 3], seed: u64) -> Result<Dataset> {
    let (_, codes) = code_labels(labels);
    let split = split_rows(&codes, fractions, seed)?;
    fit_encoder(table, labels, &split)
}
