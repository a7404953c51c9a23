use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {dim} for {what}")]
    InvalidDimension { what: String, dim: usize },

    #[error("unknown factor label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate factor label `{0}`")]
    DuplicateLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    #[error("missing factor `{0}` in signature")]
    MissingFactor(String),

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("coherent state |alpha|={alpha_abs} does not fit in {dim} levels (Poisson tail {tail:.3e})")]
    Truncation { alpha_abs: f64, dim: usize, tail: f64 },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("trace drift {drift:.3e} exceeds tolerance")]
    TraceDrift { drift: f64 },

    #[error("target |beta| = {target} exceeds the reachable bound 2*lambda/|Delta| = {bound}")]
    Infeasible { target: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state space too large for this engine: dimension {dim} exceeds {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 configuration, 3 numerical, 4 infeasible target.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } => 4,
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::InvalidDimension { .. }
            | Error::UnknownLabel(_)
            | Error::DuplicateLabel(_)
            | Error::TooLarge { .. } | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
