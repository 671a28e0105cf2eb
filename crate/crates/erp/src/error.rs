use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErpError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {record}: {msg}")]
    Format { path: PathBuf, record: String, msg: String },
    #[error("invalid epoch set: {0}")]
    Invalid(String),
    #[error("unknown column '{0}'")]
    MissingColumn(String),
    #[error("column '{0}' requested twice")]
    DuplicateColumn(String),
    #[error("column '{0}' is constant")]
    ConstantColumn(String),
    #[error("design is rank deficient: '{column}' is collinear with {with:?}")]
    RankDeficient { column: String, with: Vec<String> },
    #[error("row count mismatch: data has {data}, design has {design}")]
    RowMismatch { data: usize, design: usize },
    #[error("designs are not nested: {0}")]
    NotNested(String),
    #[error("region {0}")]
    Region(String),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ErpError>;
