use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotSpd { min_eigenvalue: f64 },

    #[error("function is not periodic in variable `{0}`")]
    NotPeriodic(String),

    #[error(
        "{what}: Newton iteration did not converge in {iterations} steps (residual {residual:e})"
    )]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "undeclared resonance at mode {mode:?}: zero divisor with coefficient {coefficient:e}"
    )]
    Resonance { mode: Vec<i32>, coefficient: f64 },

    #[error("trajectory left the evaluation domain at t = {time}")]
    DomainEscape { time: f64 },

    #[error("state outside the scaled domain: {0}")]
    OutOfDomain(String),

    #[error("graph iteration is not contracting (measured rate {rate:.4})")]
    NonContraction { rate: f64 },

    #[error("graph left the coincidence domain: {0}")]
    CoincidenceMargin(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing upstream artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
