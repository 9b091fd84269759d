use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix `{0}` contains a non-finite entry")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `I - (tau/2) A` has no usable inverse.
    #[error("bilinear transform is singular (pivot magnitude {pivot:e})")]
    SingularPencil { pivot: f64 },

    #[error("truncation bound inapplicable: tau * |A|_2 = {product} >= 3")]
    BoundInapplicable { product: f64 },

    #[error("outside the domain of the decay bound: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The locality mask removes diagonal entry `(j, j)` of the first
    /// spectral component, which must equal the identity.
    #[error("locality mask excludes diagonal entry ({0}, {0}) of the first response component")]
    MaskIdentityConflict(usize),

    #[error("no gamma in [0, 1) admits a feasible synthesis")]
    AllInfeasible,

    #[error("grid description rejected: {0}")]
    Grid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
