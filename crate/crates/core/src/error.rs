use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Variants are grouped by what went wrong rather than by module so the
/// command-line driver can map them onto exit codes directly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical model violates one of its structural invariants.
    #[error("model error: {0}")]
    Model(String),
    /// A caller-supplied argument is out of range or has the wrong shape.
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    /// A hardware constraint of the emulator cannot be met.
    #[error("constraint violated: {0}")]
    Constraint(String),
    /// An iterative or adaptive numerical procedure failed.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A truncation or quadrature did not converge to the requested tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),
    /// Circuit design failed; carries the best residual found.
    #[error("design error: {message} (best residual {residual:.3e})")]
    Design { message: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension { expected, actual });
    }
    Ok(())
}
