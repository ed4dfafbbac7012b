use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("O-tilde step needs gamma > 0 (got {0}); use the hat splitting when gamma = 0")]
    ZeroFriction(f64),
    #[error("empty sample set")]
    EmptySamples,
    #[error("quadrature support too narrow: tail mass {tail:.3e} exceeds {limit:.0e}; widen the support")]
    SupportTooNarrow { tail: f64, limit: f64 },
    #[error("quadrature did not reach tolerance {tol:.1e} (estimate {estimate:.3e})")]
    Quadrature { tol: f64, estimate: f64 },
    #[error("non-finite evaluation at {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("grid too coarse: residual does not converge under refinement (ratio {ratio:.3})")]
    GridTooCoarse { ratio: f64 },
    #[error("unknown identifier '{0}'")]
    UnknownId(String),
}
