use thiserror::Error;

/// Errors raised while validating, discretizing or solving an equilibrium problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VepError {
    #[error("interaction matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("interaction matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("infeasible upper constraint on component {component}: total cap {cap} < mass {mass}")]
    InfeasibleConstraint { component: usize, cap: f64, mass: f64 },

    #[error("mass of component {component} must be positive, got {mass}")]
    NonPositiveMass { component: usize, mass: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("external field of component {component} is invalid: {reason}")]
    InvalidField { component: usize, reason: String },

    #[error("cannot classify the tail of field {component}: {reason}")]
    UnclassifiableField { component: usize, reason: String },

    #[error("component {component} is inadmissible: V - (Cm) log(1+|x|^2) is unbounded below")]
    Inadmissible { component: usize },

    #[error("grids do not correspond cell by cell: {0}")]
    GridMismatch(String),

    #[error("regularization parameter must be >= 0, got {0}")]
    NegativeRegularization(f64),

    #[error("component {component} carries mass {actual}, expected {expected}")]
    MassMismatch {
        component: usize,
        expected: f64,
        actual: f64,
    },

    #[error("component {component}, cell {cell}: weight {weight} exceeds cap {cap}")]
    CapViolation {
        component: usize,
        cell: usize,
        weight: f64,
        cap: f64,
    },

    #[error("component {component} has no cell with a finite external field")]
    ExcludedAllCells { component: usize },

    #[error("solver stopped after {iterations} iterations with KKT residual {residual:e}")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("bad scenario parameters: {0}")]
    BadParams(String),

    #[error("malformed problem file: {0}")]
    Parse(String),
}

impl VepError {
    /// Stable machine-readable code, used by the CLI in its error reports.
    pub fn code(&self) -> &'static str {
        match self {
            VepError::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            VepError::NotSymmetric { .. } => "NotSymmetric",
            VepError::DegenerateSupport(_) => "DegenerateSupport",
            VepError::InfeasibleConstraint { .. } => "InfeasibleConstraint",
            VepError::NonPositiveMass { .. } => "NonPositiveMass",
            VepError::DimensionMismatch(_) => "DimensionMismatch",
            VepError::InvalidField { .. } => "InvalidField",
            VepError::UnclassifiableField { .. } => "UnclassifiableField",
            VepError::Inadmissible { .. } => "Inadmissible",
            VepError::GridMismatch(_) => "GridMismatch",
            VepError::NegativeRegularization(_) => "NegativeRegularization",
            VepError::MassMismatch { .. } => "MassMismatch",
            VepError::CapViolation { .. } => "CapViolation",
            VepError::ExcludedAllCells { .. } => "ExcludedAllCells",
            VepError::MaxIterExceeded { .. } => "MaxIterExceeded",
            VepError::UnknownScenario(_) => "UnknownScenario",
            VepError::BadParams(_) => "BadParams",
            VepError::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, VepError>;
