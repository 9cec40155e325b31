use thiserror::Error;

/// Errors raised by the bound computations, the solver and the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("matrix is not positive definite: {what} (min eigenvalue {eigenvalue:.3e})")]
    NotPositiveDefinite { what: String, eigenvalue: f64 },

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("POVM elements do not sum to the identity (max deviation {0:.3e})")]
    NotComplete(f64),

    #[error("parameter outside the model domain: {0}")]
    Domain(String),

    #[error("state is rank deficient: eigenvalue {eigenvalue:.3e} below {threshold:.1e}")]
    RankDeficient { eigenvalue: f64, threshold: f64 },

    #[error("irregular model: outcome {outcome} has probability {probability:.3e} but derivative {derivative:.3e}")]
    IrregularModel {
        outcome: usize,
        probability: f64,
        derivative: f64,
    },

    #[error("Helstrom matrix is singular (min eigenvalue {0:.3e}); no feasible X collection")]
    SingularHelstrom(f64),

    #[error("solver did not converge after {iterations} iterations (best value {best_value})")]
    NonConvergence { iterations: usize, best_value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("taper infeasible: mass deficit {deficit:.4} exceeds allowance {allowance:.4}")]
    InfeasibleTaper { deficit: f64, allowance: f64 },

    #[error("solver failed at quadrature node {node:?}: {source}")]
    NodeFailure {
        node: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("prior information J(pi) appears infinite: refinement drift {drift:.3} (levels {levels:?})")]
    InfiniteJ { drift: f64, levels: Vec<f64> },

    #[error("degenerate van Trees denominator: {0}")]
    DegenerateDenominator(String),

    #[error("embedding construction failed at eps={eps}: min eigenvalue {eigenvalue:.3e}")]
    EmbeddingFailure { eps: f64, eigenvalue: f64 },

    #[error("estimator failed on {failures} of {trials} trials")]
    EstimatorFailures { failures: usize, trials: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
