//! Tabular ingestion, encoding, splitting and synthetic cohorts.

mod encode;
mod split;
mod synth;
mod table;

pub use encode::{
    apply_encoder, code_labels, fit_encoder, prepare_dataset, ColumnEncoding, ColumnMeta, Dataset, EncodingMeta,
};
pub use split::{split_rows, Split};
pub use synth::{class_name, gen_synthetic, SyntheticCohort, SyntheticParams, CLASS_MEAN_GAP};
pub use table::{
    load_csv, read_csv, save_csv, write_csv, Column, ColumnKind, CsvData, CsvOptions, RawTable,
};
