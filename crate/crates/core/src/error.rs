use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A trajectory left the finite reals; `chain` is set when the failure
    /// happened inside a multi-chain estimate.
    #[error("non-finite state at step {step}{}: {state:?}", chain.map(|c| format!(" of chain {c}")).unwrap_or_default())]
    NonFiniteState {
        chain: Option<usize>,
        step: usize,
        state: Vec<f64>,
    },

    #[error("non-finite function value at index {index}")]
    NonFiniteValue { index: usize },

    #[error("empirical measure has no retained samples")]
    EmptyMeasure,

    #[error(
        "localization balls {first} and {second} overlap (center distance {distance} <= 2 * radius {radius}); use a smaller radius"
    )]
    OverlappingBalls {
        first: usize,
        second: usize,
        distance: f64,
        radius: f64,
    },

    #[error("point is not critical: |grad V| = {norm:e}")]
    NotCritical { norm: f64 },

    #[error("eigenvalue of modulus {modulus} lies on the splitting ring |z| = {threshold}")]
    SpectrumOnThreshold { modulus: f64, threshold: f64 },

    #[error("reparametrization regions overlap after inflation by the blend width")]
    OverlappingRegions,

    #[error(
        "V-levels {target} (target) and {other} (other fixed point) are separated by less than {required}"
    )]
    InsufficientSeparation {
        target: f64,
        other: f64,
        required: f64,
    },

    #[error("test-function precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate cell ({alpha}, {beta}] with mass {mass:e}")]
    DegenerateCell { alpha: f64, beta: f64, mass: f64 },

    #[error("codebook ordering violated at index {index}")]
    OrderingViolation { index: usize },

    #[error("Voronoi cell {index} received only {count} samples")]
    UnderfilledCell { index: usize, count: usize },

    #[error("codepoints {first} and {second} coincide")]
    DuplicateCodepoint { first: usize, second: usize },

    #[error("adaptive quadrature failed to converge on [{lo}, {hi}]")]
    Quadrature { lo: f64, hi: f64 },

    #[error("system has no discontinuity indicator")]
    MissingIndicator,

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
