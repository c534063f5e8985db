use alloc::vec::Vec;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("diagonal entry {i} is not 1; rescale the model first")]
    NonUnitDiagonal { i: usize },
    #[error("diagonal entry {i} is not positive")]
    NonpositiveDiagonal { i: usize },
    #[error("index ({i}, {j}) out of range for n = {n}")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("n = {n} exceeds the dense guard {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("model graph is not connected")]
    Disconnected,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("pairwise-normalizable partition needs lambda_max <= 1, got {lambda_max}")]
    StrategyInapplicable { lambda_max: f64 },
    #[error("alpha must be positive (edge {edge})")]
    NonpositiveAlpha { edge: usize },
    #[error("no positive definite model found after {attempts} attempts")]
    CannotSatisfy { attempts: usize },
    #[error("variance at node {i} is not positive")]
    NonpositiveVariance { i: usize },
    #[error("pair marginal on edge ({i}, {j}) is not normalizable")]
    NonNormalizablePair { i: usize, j: usize },
    #[error("initial pair marginals not normalizable on {} edge(s)", edges.len())]
    InitialNonNormalizable { edges: Vec<(usize, usize)> },
    #[error("zero denominator updating message ({i}, {j})")]
    ZeroDenominator { i: usize, j: usize },
    #[error("message update produced a non-finite value")]
    NonFinite,
    #[error("not a fixed point: moment matching residual {residual:e}")]
    NotAFixedPoint { residual: f64 },
    #[error("not a stationary point: gradient norm {grad_norm:e}")]
    NotStationary { grad_norm: f64 },
    #[error("w_ij * w_ji = 1 on edge ({i}, {j})")]
    DegenerateEdge { i: usize, j: usize },
    #[error("invalid specification: {0}")]
    InvalidSpec(&'static str),
    #[error("alpha = {alpha} outside (0, {k})")]
    AlphaOutOfRange { alpha: f64, k: f64 },
    #[error("K*r = {kr} is not above 1")]
    RegimeMismatch { kr: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
