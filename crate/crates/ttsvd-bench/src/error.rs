use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] ttsvd::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report: {0}")]
    Report(String),
    #[error("verification failed: error {error:e} exceeds {bound:e}")]
    Verify { error: f64, bound: f64 },
}

impl CliError {
    /// 2 for bad flags or profiles, 3 for shape and memory problems, 1 for
    /// numerical failures and everything else.
    pub fn exit_code(&self) -> i32 {
        use ttsvd::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => match e {
                E::Parse(_) => 2,
                E::Layout(_)
                | E::Allocation { .. }
                | E::DimensionMismatch(_)
                | E::Dimension(_)
                | E::Shape(_)
                | E::DegenerateDimension(_)
                | E::PartitionMismatch(_) => 3,
                _ => 1,
            },
            _ => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Report(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Report(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
