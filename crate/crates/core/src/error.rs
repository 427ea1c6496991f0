use thiserror::Error;

/// A variable refers to a column the dataset does not have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("variable x{} out of range for dataset with {arity} input column(s)", .index + 1)]
pub struct ArityError {
    pub index: usize,
    pub arity: usize,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset has no rows")]
    Empty,
    #[error("column `{name}` has {found} rows, expected {expected}")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateName(String),
    #[error("non-finite value in column `{name}` at row {row}")]
    NonFinite { name: String, row: usize },
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("csv needs at least one input column and a target column")]
    TooFewColumns,
    #[error("row {row}: cannot parse `{field}` as a number")]
    BadNumber { row: usize, field: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
