use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("invalid initial data: {0}")]
    InitialData(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("no blow-up law: {0}")]
    NoBlowUpLaw(String),
    #[error("fit refused: {0}")]
    Fit(String),
    #[error("audit error: {0}")]
    Audit(String),
    #[error("decay fit error: {0}")]
    Decay(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trajectory file: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
