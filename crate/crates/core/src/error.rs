use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry::make_domain: resolution too coarse, no interior nodes at h = {h}")]
    ResolutionTooCoarse { h: f64 },

    #[error("unsupported complex dimension n = {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hessian_core: node {0} is not an interior node")]
    NotInterior(usize),

    #[error("hessian_core::sigma_k: k = {k} out of range 1..={n}")]
    KOutOfRange { k: usize, n: usize },

    #[error("{op}: spectrum outside the Gamma_{m} cone")]
    OutsideCone { op: &'static str, m: usize },

    #[error("dirichlet_solver: negative right-hand side {value} at interior node {node}")]
    NegativeRhs { node: usize, value: f64 },

    #[error("dirichlet_solver: no step length keeps the iterate in the cone (Newton iteration {iteration})")]
    ConeEscape { iteration: usize },

    #[error("{op}: no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("dirichlet_solver::fixed_point_decreasing: monotonicity violated by {amount:e} at iteration {iteration}")]
    MonotonicityViolation { iteration: usize, amount: f64 },

    #[error("{op}: weight must be strictly positive (min {min})")]
    NonPositiveWeight { op: &'static str, min: f64 },

    #[error("eigen_solver::continuity_path: path stagnated at lambda = {lambda} without blow-up")]
    PathStagnation { lambda: f64 },

    #[error("{op}: denominator vanishes")]
    ZeroDenominator { op: &'static str },

    #[error("radial_oracle: no sign change of v(R^2) in [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("radial_oracle: step size underflow at t = {t}")]
    StiffStep { t: f64 },

    #[error("bifurcation: precondition gamma0 < lambda1 violated (gamma0 = {gamma0}, lambda1 = {lambda1})")]
    PreconditionViolated { gamma0: f64, lambda1: f64 },

    #[error("bifurcation: psi violates its declared slope bound: d_s psi = {slope} < -gamma0 = {bound} at s = {s}")]
    SlopeBoundViolated { s: f64, slope: f64, bound: f64 },

    #[error("bifurcation: continuation stalled at t = {t}")]
    ContinuationStall { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
