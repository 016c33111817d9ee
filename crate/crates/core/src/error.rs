use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty table")]
    EmptyTable,
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("label column absent: {0}")]
    LabelColumnAbsent(String),
    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),
    #[error("missing columns: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("column {column}: kind mismatch (expected {expected})")]
    KindMismatch { column: String, expected: &'static str },
    #[error("column {0}: all values missing in the train split")]
    AllMissing(String),
    #[error("class {0:?} does not appear in the train split")]
    ClassMissingFromTrain(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("class {class} has {rows} rows but {required} splits require it")]
    ClassTooSmall {
        class: String,
        rows: usize,
        required: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("asymmetric edge list: ({0}, {1}) has no reverse")]
    Asymmetric(usize, usize),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("non-finite value at epoch {epoch} in {stage}")]
    NonFinite { epoch: usize, stage: &'static str },
    #[error("all weighted sample weights are zero")]
    ZeroWeights,
    #[error("all candidate graphs failed to train")]
    AllCandidatesFailed,
    #[error("no weak learnability: first round error {err:.4} >= {bound:.4}")]
    NoWeakLearnability { err: f64, bound: f64 },
    #[error("AUROC undefined: input contains a single class")]
    SingleClass,
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
