use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix order {n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("depth {depth} is invalid for {rows} rows (cap {cap})")]
    Depth { depth: usize, rows: usize, cap: usize },
    #[error("table needs {required} bytes, budget is {budget}")]
    MemoryBudget { required: u64, budget: u64 },
    #[error("numeric overflow: {0}")]
    Overflow(&'static str),
    #[error("permanent is zero")]
    ZeroPermanent,
    #[error("fixed pairs repeat row or column index {0}")]
    DuplicateIndex(usize),
    #[error("bound does not nest after {refinements} refinements")]
    NestingFailure { refinements: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trial budget exhausted: {accepted} accepts in {trials} trials")]
    TrialBudget { trials: u64, accepted: u64 },
    #[error("sample budget {required} exceeds cap {cap}")]
    SampleBudget { required: u64, cap: u64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
