use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("operand outside the map's domain: {0}")]
    Domain(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("subspace not closed under {generator} (residual {residual:.3e})")]
    NotClosed { generator: String, residual: f64 },
    #[error("Wedderburn decomposition failed: {reason} (residual {residual:.3e})")]
    Decomposition { reason: String, residual: f64 },
    #[error("containment check failed: {0}")]
    Containment(String),
    #[error("integration error at step {step}: {reason}")]
    Integration { step: usize, reason: String },
    #[error("linear filter degenerate at step {step}: <e, v> = {value:.3e}")]
    Degeneracy { step: usize, value: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
