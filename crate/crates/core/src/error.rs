use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("invalid wave parameters c = {c}, k = {k}: need c > 2k > 0")]
    InvalidParams { c: f64, k: f64 },

    #[error("grid too short: tail height {tail:.3e} at x = L exceeds tolerance {tol:.3e}")]
    GridTooShort { tail: f64, tol: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("time step {dt} exceeds CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("solution became non-finite at t = {t}")]
    Blowup { t: f64 },

    #[error("spectrum classification failed: {0}")]
    Classification(String),

    #[error("lambda = {lambda} lies within {tol:e} of eigenvalue {eigenvalue}")]
    NearSingular {
        lambda: f64,
        eigenvalue: f64,
        tol: f64,
    },

    #[error("initial data violates w0 > 0: min w0 = {min_w0:.6e} at x = {x:.4}")]
    NonPositiveMomentum { min_w0: f64, x: f64 },

    #[error("foliation root-find failed: {0}")]
    Foliation(String),

    #[error("invalid certificate constants: {0}")]
    InvalidCertificate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io: {0}")]
    Io(String),

    #[error("malformed field data: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
