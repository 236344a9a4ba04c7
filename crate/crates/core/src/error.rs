use thiserror::Error;

use crate::lattice::Site;

#[derive(Debug, Error)]
pub enum Error {
    #[error("windows overlap at site {0}")]
    OverlappingWindows(Site),

    #[error("site {0} is not contained in the enclosing window")]
    NotASubwindow(Site),

    #[error("site {0} appears more than once in a window")]
    DuplicateSite(Site),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("configuration has {actual} values for a window of {expected} sites")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("enumeration of {requested} states exceeds the budget of {budget}")]
    BudgetExceeded { requested: u128, budget: u64 },

    #[error("boundary value at {0} is undefined (free tail beyond the annulus)")]
    TailUndefined(Site),

    #[error("site {0} belongs to the interior window and is not part of the boundary")]
    InteriorSiteRead(Site),

    #[error("boundary annulus does not cover the interaction neighbourhood at {0}")]
    AnnulusTooSmall(Site),

    #[error("model has unbounded dependency and cannot be evaluated under a free tail")]
    UnboundedDependency,

    #[error("transition energy table is missing the entry ({x}, {u})")]
    IncompleteTable { x: String, u: String },

    #[error("probability {value} at {at} is not strictly positive")]
    NotStrictlyPositive { at: String, value: f64 },

    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("transition energy table violates the cocycle law by {0}")]
    CocycleViolation(f64),

    #[error("one-point field is inconsistent at sites {t} and {s} (violation {violation})")]
    InconsistentField { t: Site, s: Site, violation: f64 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("unknown symbol label {0:?}")]
    UnknownSymbol(String),

    #[error("parameter {name} = {value} is out of range: {reason}")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("mixture components must differ (p1 = p2 = {0})")]
    EqualParameters(f64),

    #[error("site {0} lies outside the half-line of positive integers")]
    NotInitialSegment(Site),

    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
