use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),
    #[error("allocation of {requested} bytes exceeds the memory budget of {budget} bytes")]
    Allocation { requested: u128, budget: u128 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    Convergence { sweeps: usize },
    #[error("tensor order {0} is degenerate, need at least 2 dimensions")]
    DegenerateDimension(usize),
    #[error("partition mismatch: {0}")]
    PartitionMismatch(String),
    #[error("volume model diverges for reduction factor {0} (must be < 1)")]
    Divergence(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
