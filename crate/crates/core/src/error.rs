use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: iteration did not converge")]
    NonConvergence { op: &'static str },

    #[error("{op}: matrix contains non-finite entries")]
    NonFinite { op: &'static str },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate polynomial: {0}")]
    DegeneratePolynomial(String),

    #[error("kernel singular at s = {s}, x = {x}")]
    KernelSingular { s: Complex64, x: Complex64 },

    #[error("kernel vector vanishes at x = {x}")]
    ZeroKernelVector { x: Complex64 },

    #[error("no pseudoinverse threshold keeps the eigenmatrix norm below {bound} (best achievable {best})")]
    NormBoundUnreachable { bound: f64, best: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input or configuration rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidArgument(_) | Error::Shape(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_)
        )
    }
}
