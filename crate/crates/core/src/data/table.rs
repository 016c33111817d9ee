//! Raw tabular input and the CSV dialect.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl ColumnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        }
    }
}

/// A column before encoding; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Numeric(_) => ColumnKind::Numeric,
            Column::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(idx.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => {
                Column::Categorical(idx.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Numeric(v) => v[i].map_or_else(String::new, |x| x.to_string()),
            Column::Categorical(v) => v[i].clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        let n_rows = columns.first().map_or(0, Column::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::Shape(format!(
                "column of length {} in a table of {n_rows} rows",
                bad.len()
            )));
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> RawTable {
        RawTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(idx)).collect(),
            n_rows: idx.len(),
        }
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Column holding the class label; `None` for unlabeled data.
    pub label: Option<String>,
    /// Per-column kind overrides.
    pub hints: HashMap<String, ColumnKind>,
    /// Accept a header-only file instead of failing with `EmptyTable`.
    pub allow_empty: bool,
}

impl CsvOptions {
    pub fn labeled(label: impl Into<String>) -> Self {
        Self {
            label: Some(label.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvData {
    pub table: RawTable,
    pub labels: Option<Vec<String>>,
}

pub(crate) fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<CsvData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let width = header.len();

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row: row + 1,
                expected: width,
                found: record.len(),
            });
        }
        for (col, cell) in cells.iter_mut().zip(record.iter()) {
            col.push(cell.to_owned());
        }
    }

    let label_idx = match &opts.label {
        Some(label) => Some(
            header
                .iter()
                .position(|h| h == label)
                .ok_or_else(|| Error::LabelColumnAbsent(label.clone()))?,
        ),
        None => None,
    };
    let n_rows = cells.first().map_or(0, Vec::len);
    if n_rows == 0 && !opts.allow_empty {
        return Err(Error::EmptyTable);
    }

    let mut names = Vec::with_capacity(width);
    let mut columns = Vec::with_capacity(width);
    let mut labels = None;
    for (idx, (name, raw)) in header.into_iter().zip(cells).enumerate() {
        if Some(idx) == label_idx {
            labels = Some(raw);
            continue;
        }
        let kind = match opts.hints.get(&name) {
            Some(kind) => *kind,
            None if raw
                .iter()
                .all(|c| is_missing(c) || parse_number(c).is_some()) =>
            {
                ColumnKind::Numeric
            }
            None => ColumnKind::Categorical,
        };
        let column = match kind {
            ColumnKind::Numeric => {
                let mut values = Vec::with_capacity(raw.len());
                for c in &raw {
                    if is_missing(c) {
                        values.push(None);
                    } else {
                        values.push(Some(parse_number(c).ok_or_else(|| {
                            Error::KindMismatch {
                                column: name.clone(),
                                expected: "numeric",
                            }
                        })?));
                    }
                }
                Column::Numeric(values)
            }
            ColumnKind::Categorical => Column::Categorical(
                raw.into_iter()
                    .map(|c| if is_missing(&c) { None } else { Some(c) })
                    .collect(),
            ),
        };
        names.push(name);
        columns.push(column);
    }
    let table = RawTable::new(names, columns)?;
    Ok(CsvData { table, labels })
}

/// Writes `table` (plus an optional trailing label column) in the CSV dialect
/// accepted by [`read_csv`]. Numbers use the shortest round-trip representation.
pub fn write_csv<W: Write>(
    writer: W,
    table: &RawTable,
    labels: Option<(&str, &[String])>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = table.names().iter().map(String::as_str).collect();
    if let Some((name, _)) = labels {
        header.push(name);
    }
    wtr.write_record(&header)?;
    for i in 0..table.n_rows() {
        let mut rec: Vec<String> = table.columns().iter().map(|c| c.cell(i)).collect();
        if let Some((_, l)) = labels {
            rec.push(l[i].clone());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

pub fn save_csv(
    path: impl AsRef<Path>,
    table: &RawTable,
    labels: Option<(&str, &[String])>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), table, labels)
}
