use thiserror::Error;

/// Errors produced by the solvers and the scenario model.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TpcError {
    /// Degenerate geometry, e.g. a UAV sitting exactly on a ground terminal.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that violate an operation's preconditions (dimension mismatch,
    /// out-of-range horizon, bad configuration).
    #[error("usage error: {0}")]
    Usage(String),

    /// The scenario admits no feasible solution for the requested problem.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The interior-point kernel was handed a start point that is not strictly
    /// feasible.
    #[error("start point violates constraint {index} (g = {value:e})")]
    InfeasibleStart { index: usize, value: f64 },

    /// Newton iterations produced non-finite values or the Hessian could not be
    /// regularized.
    #[error("numerical failure: {message}")]
    Numerical { message: String, iterate: Vec<f64> },

    /// The linearized interference denominator left its trust region.
    #[error("trust region violated: linearized distance {value:e} <= 0")]
    TrustRegion { value: f64 },

    /// The initial trajectory planner could not build a strictly feasible path.
    #[error("initialization failed: {0}")]
    InitFailure(String),

    /// The reduced horizon needed to reach the hover positions exceeds N/2.
    #[error("horizon too short: need {required} slots, only {available} available")]
    HorizonTooShort { required: usize, available: usize },

    /// The segment driver stopped making progress toward the hover rate.
    #[error("segment driver stalled: best end-of-segment sum rate {best_rate:e} bit/s below target {target:e} bit/s")]
    Stall { best_rate: f64, target: f64 },

    /// Should not happen: a subproblem that is feasible by construction failed.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, TpcError>;
