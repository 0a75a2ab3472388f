use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("dimension {0} is not supported (expected 2, 3 or 4)")]
    Dimension(usize),
    #[error("invalid cylinder direction {0:?}: must be nonzero with nonnegative coordinates")]
    InvalidDirection(Vec<i32>),
    #[error("points are not nearest neighbours")]
    NotAdjacent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightsError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} outside (0, 1)")]
    InvalidProbability(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid exponents: beta*K = {lhs} exceeds alpha*L = {rhs}")]
    InvalidExponents { lhs: f64, rhs: f64 },
    #[error("invalid moment-check sizes: need L >= K >= 1 and N >= 1")]
    InvalidSizes,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("target unreachable inside the region")]
    Unreachable,
    #[error("no path found inside the window; the window is too small")]
    WindowTooSmall,
    #[error("no window point satisfies the target predicate")]
    EmptyTarget,
    #[error("source set is empty or outside the region and window")]
    BadSource,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShellError {
    #[error("cluster flood reached the window boundary")]
    WindowOverflow,
    #[error("no box D_n(z) inside the window meets a boundary-reaching white cluster")]
    NoWhiteWitness,
    #[error("shell is indeterminate")]
    Indeterminate,
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegenError {
    #[error("no regeneration level up to {0}")]
    NoRegeneration(u64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("radius {radius} too small, need at least {needed}")]
    RadiusTooSmall { radius: f64, needed: f64 },
    #[error("t̄ = {0} has P(τ ≤ t̄) = 0")]
    DegenerateThreshold(f64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviationError {
    #[error("time constant too uncertain: CI half-width {ci} exceeds {limit}")]
    MuTooUncertain { ci: f64, limit: f64 },
    #[error("time constant degenerate (lower bound {0})")]
    MuDegenerate(f64),
    #[error("empty direction fan")]
    EmptyFan,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not enough replicas: {got} < {needed}")]
    TooFewReplicas { got: usize, needed: usize },
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error(transparent)]
    Path(#[from] PathError),
}
