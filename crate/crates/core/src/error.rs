use thiserror::Error;

/// Errors raised while defining or evaluating a target density.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TargetError {
    #[error("invalid box domain: {0}")]
    InvalidDomain(String),
    #[error("model returned a non-finite value at point {point:?}")]
    NonFinite { point: Vec<f64> },
    #[error("residual posterior needs at least one data point")]
    EmptyData,
    #[error("invalid truncation spec: {0}")]
    InvalidTruncation(String),
    #[error("data file: {0}")]
    Data(String),
    #[error("point {point:?} has dimension {got}, target expects {expected}")]
    Dimension {
        point: Vec<f64>,
        got: usize,
        expected: usize,
    },
}

/// Errors raised by the grid-based conditional approximation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionalError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid clamp bounds: epsilon={epsilon}, m={m} (need 0 < epsilon < m)")]
    InvalidClamp { epsilon: f64, m: f64 },
    #[error("invalid interpolation scheme: {0}")]
    InvalidScheme(String),
    #[error("grid [{grid_lo}, {grid_hi}] does not span the axis slice [{lo}, {hi}]")]
    GridMismatch {
        grid_lo: f64,
        grid_hi: f64,
        lo: f64,
        hi: f64,
    },
    #[error("conditional has zero mass and clamping is disabled")]
    Degenerate,
    #[error("unclamped interpolant is negative near t={0}")]
    NegativeDensity(f64),
    #[error("t={t} lies outside [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Errors raised by the chain samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid chain config: {0}")]
    InvalidConfig(String),
    #[error("target `{0}` has no exact conditionals; use griddy_chain instead")]
    Unsupported(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("chain output is empty")]
    Empty,
    #[error(transparent)]
    Conditional(#[from] ConditionalError),
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Errors raised by the finite kernel laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("state grid has {0} states, above the cap of 20000")]
    TooManyStates(usize),
    #[error("invalid state grid: {0}")]
    InvalidStates(String),
    #[error("conditional slice sums to zero at context {0}")]
    DegenerateSlice(usize),
    #[error("kernel is not row-stochastic: row {row} integrates to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("kernels live on different state grids")]
    DimensionMismatch,
    #[error("fixed-vector solve failed: {0}")]
    Solve(String),
    #[error("power iteration did not converge after {0} iterations (kernel may be reducible)")]
    NonConvergent(usize),
    #[error("spectral gap {0:e} below 1e-12; fixed space is numerically degenerate")]
    NearDegenerateGap(f64),
    #[error("truncation-bound hypothesis t >= C2/2 violated: t={t}, C2={c2}")]
    HypothesisViolation { t: f64, c2: f64 },
    #[error("tail constants unavailable: supply (c1, c2) or (c3, c4) with finite p")]
    TailConstantsUnavailable,
    #[error(transparent)]
    Conditional(#[from] ConditionalError),
    #[error(transparent)]
    Target(#[from] TargetError),
}

/// Errors raised by the diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no samples")]
    Empty,
    #[error("series has zero variance; autocorrelation undefined")]
    ZeroVariance,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target has no closed-form reference CDF")]
    NoReference,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Module-qualified error for callers that drive whole pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("target_density: {0}")]
    Target(#[from] TargetError),
    #[error("conditional_approx: {0}")]
    Conditional(#[from] ConditionalError),
    #[error("samplers: {0}")]
    Sampler(#[from] SamplerError),
    #[error("kernel_lab: {0}")]
    Kernel(#[from] KernelError),
    #[error("diagnostics: {0}")]
    Diagnostics(#[from] DiagnosticsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
