use thiserror::Error;

/// Errors produced by model construction, the equilibrium solver and the
/// simulation layer.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("unknown seller id {0}")]
    UnknownSeller(usize),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("infeasible market: seller {seller} node {node}: {detail}")]
    Infeasible {
        seller: usize,
        node: usize,
        detail: String,
    },

    #[error("invalid pricing rule: {0}")]
    InvalidRule(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "projection did not reach tolerance {tol:.3e} within {iterations} iterations \
         (best KKT residual {residual:.3e})"
    )]
    ProjectionBudget {
        tol: f64,
        iterations: usize,
        residual: f64,
        /// Best iterate found before the budget ran out.
        best: Vec<f64>,
    },

    #[error("fixed point iteration did not converge in {iterations} iterations (last step {last_step:.3e})")]
    NonConvergence {
        iterations: usize,
        last_step: f64,
        trace: Vec<f64>,
    },

    #[error(
        "fixed point iteration diverged (step norm grew {growth:.1}x over the window); \
         try a smaller step_alpha than {step_alpha:.3e}"
    )]
    Divergence {
        step_alpha: f64,
        growth: f64,
        trace: Vec<f64>,
    },

    #[error("implicit-lag loop did not converge in {outer_iterations} rounds (consistency {consistency:.3e})")]
    LagNonConvergence {
        outer_iterations: usize,
        consistency: f64,
    },

    #[error("best response verifier stalled: {0}")]
    BestResponse(String),

    #[error("gap linear program failed: {0}")]
    GapLp(String),

    #[error("analytic oracle precondition violated: {0}")]
    OraclePrecondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
