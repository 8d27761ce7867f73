use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {context}; state: {state}")]
    Numeric { context: &'static str, state: String },

    /// A cached quantity drifted away from its direct recomputation.
    #[error("state audit failed at iteration {iteration}: {detail}")]
    AuditFailed { iteration: usize, detail: String },

    #[error("oracle did not converge: {0}")]
    OracleFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the input data rather than the solver.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Dimension(_)
                | Error::EmptyDataset
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
