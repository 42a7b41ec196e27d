use thiserror::Error;

/// Errors produced by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("no positive ground state: principal eigenvalue {lambda1} >= 1")]
    NoPositiveSolution { lambda1: f64 },

    #[error("coupling constant mu[{index}] = 0 lies on the case boundary")]
    DegenerateCoupling { index: usize },

    #[error("beta = {beta} coincides with the pole mu[{index}] = {mu}")]
    PoleAtMu { beta: f64, index: usize, mu: f64 },

    #[error("g vanishes at beta = {beta}; f is undefined there")]
    PoleAtBetaBar { beta: f64 },

    #[error("beta_bar is not defined in the mixed case")]
    NotApplicable,

    #[error("beta = {beta} lies outside the synchronized branch interval")]
    OutsideBranchInterval { beta: f64 },

    #[error("computed spectrum is insufficient: {0}")]
    InsufficientSpectrum(String),

    #[error(
        "f(beta) = {f_value} is within {tol:e} of the eigenvalue {lambda}; Morse index refused"
    )]
    TooCloseToCrossing { f_value: f64, lambda: f64, tol: f64 },

    #[error("beta = {beta} must lie below mu_1 = {mu1} for the block reduction")]
    InvalidBeta { beta: f64, mu1: f64 },

    #[error("bifurcation origin is degenerate: |f'(beta_k)| = {fprime:e}")]
    DegenerateOrigin { fprime: f64 },

    #[error("kernel multiplicity {multiplicity} > 1: no branch-switch selection rule")]
    MultiplicityUnsupported { multiplicity: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
