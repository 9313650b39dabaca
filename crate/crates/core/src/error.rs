use thiserror::Error;

/// Errors produced by the forward model, the solver and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("configuration count C({n}+{k}-1, {k}) overflows the platform integer range")]
    Overflow { n: usize, k: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("permanent of order {0} exceeds the supported maximum of {max}", max = crate::fock::MAX_PERMANENT_ORDER)]
    PermanentTooLarge(usize),
    #[error("photon number mismatch: expected {expected}, found {found}")]
    PhotonMismatch { expected: u32, found: u32 },
    #[error("input superposition is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("correlation order {order} out of range 1..={photons}")]
    OrderOutOfRange { order: usize, photons: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("sparsity {k} out of range 1..={n}")]
    SparsityOutOfRange { k: usize, n: usize },
    #[error("depolarization {0} outside [0, 1]")]
    DepolarizationOutOfRange(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
