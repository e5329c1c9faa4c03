use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A function was called outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed fixture or config file contents.
    #[error("parse error: {0}")]
    Parse(String),

    /// Not enough samples to form the requested statistic.
    #[error("statistics error: {0}")]
    Statistics(String),

    /// The box and budget constraints admit no feasible point.
    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
