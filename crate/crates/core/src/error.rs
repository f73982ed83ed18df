use std::path::PathBuf;

use minrep_milp::MilpError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("cannot choose {k} centers from {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("invalid fairness spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver budget exhausted before a feasible assignment was found")]
    BudgetExhausted,
    #[error("solver failed: {0}")]
    Solver(#[from] MilpError),
    #[error("numerical failure in the assignment solver")]
    Numerical,
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid CNF: {0}")]
    Cnf(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
