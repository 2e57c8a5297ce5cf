use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ellipticity violated: {0}")]
    EllipticityViolation(String),

    #[error("Gram matrix is numerically singular (condition estimate {condition:e})")]
    SingularGram { condition: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("corrector set does not belong to this coefficient field: {0}")]
    MismatchedCorrectors(String),

    #[error("flux tensor is not divergence free (relative residual {0:e})")]
    NotDivergenceFree(f64),

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),

    #[error("mesh spacing {h:e} does not resolve eps = {eps:e} (need h <= eps/{kappa})")]
    ResolutionTooCoarse { h: f64, eps: f64, kappa: f64 },

    #[error("degenerate cell: {0}")]
    DegenerateCell(String),

    #[error("unsupported discretization: {0}")]
    Unsupported(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("field cannot be evaluated where smoothing needs it: {0}")]
    SupportUnavailable(String),

    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    #[error("weighted norm requested without a boundary distance")]
    WeightUnavailable,

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("right-hand side does not vanish on the test region")]
    NotHomogeneous,

    #[error("missing regularity metadata: {0}")]
    MissingRegularityMetadata(String),

    #[error("log-log fit needs positive values, got {0:e}")]
    NonPositiveValue(f64),

    #[error("inconsistent meshes: {0}")]
    InconsistentMeshes(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Solver-side failures, as opposed to bad input or configuration.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::SolverDivergence { .. }
                | Error::SingularGram { .. }
                | Error::NotDivergenceFree(_)
                | Error::DegenerateCell(_)
                | Error::BudgetExceeded(_)
        )
    }
}
