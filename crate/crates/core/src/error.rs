use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("coordinate index {index} out of range for N={dim} at {line}:{column}")]
    Index {
        index: usize,
        dim: usize,
        line: usize,
        column: usize,
    },

    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("point lies outside the domain box (coordinate {coordinate})")]
    Domain { coordinate: usize },

    #[error("non-finite result while evaluating {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("gradient norm {norm:e} exceeds critical-point tolerance {tol:e}")]
    NotCritical { norm: f64, tol: f64 },

    #[error("degenerate Hessian at critical point (min/max |eigenvalue| = {ratio:e})")]
    DegenerateHessian { ratio: f64 },

    #[error("level {v} lies above the catalog cutoff {v_max}")]
    CutoffExceeded { v: f64, v_max: f64 },

    #[error("fewer than two distinct critical values; eps0 must be supplied")]
    SingleLevel,

    #[error("Morse index {k} is an edge index for N={dim}; use the edge slice formula")]
    EdgeIndex { k: usize, dim: usize },

    #[error("dimension N={0} too small for the quadric slice integral (need N > 2)")]
    DimensionTooSmall(usize),

    #[error("sub-level set touches the sampling box ({boundary_hits} hits in the boundary shell)")]
    BoxTooSmall { boundary_hits: u64 },

    #[error("shell half-width {h:e} too small: only {hits} samples fell in the shell")]
    HTooSmall { h: f64, hits: u64 },

    #[error("gradient norm {norm:e} below floor {floor:e}")]
    NearCritical { norm: f64, floor: f64 },

    #[error("pseudo-cylinders of critical points {first} and {second} overlap")]
    OverlapDetected { first: usize, second: usize },

    #[error("zero volume at v={v}")]
    ZeroVolume { v: f64 },

    #[error("relative error {rel:.3} at v={v} too large for a stable logarithm")]
    NoisyEstimate { v: f64, rel: f64 },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    Quadrature { error: f64, intervals: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name, used by the CLI error JSON and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "SyntaxError",
            Error::Index { .. } => "IndexError",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::Domain { .. } => "DomainError",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotCritical { .. } => "NotCritical",
            Error::DegenerateHessian { .. } => "DegenerateHessian",
            Error::CutoffExceeded { .. } => "CutoffExceeded",
            Error::SingleLevel => "SingleLevel",
            Error::EdgeIndex { .. } => "EdgeIndex",
            Error::DimensionTooSmall(_) => "DimensionTooSmall",
            Error::BoxTooSmall { .. } => "BoxTooSmall",
            Error::HTooSmall { .. } => "HTooSmall",
            Error::NearCritical { .. } => "NearCritical",
            Error::OverlapDetected { .. } => "OverlapDetected",
            Error::ZeroVolume { .. } => "ZeroVolume",
            Error::NoisyEstimate { .. } => "NoisyEstimate",
            Error::GridTooCoarse(_) => "GridTooCoarse",
            Error::Quadrature { .. } => "QuadratureError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }
}
