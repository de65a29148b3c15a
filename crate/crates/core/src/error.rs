use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size {step} is outside the admissible interval (0, {upper})")]
    StepSize { step: f64, upper: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("iteration cap of {cap} steps exceeded")]
    CapExceeded { cap: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("malformed record: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Invalid(format!("{what} must be finite, got {x}")));
    }
    Ok(())
}
