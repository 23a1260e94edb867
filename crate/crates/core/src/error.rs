use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown potential '{0}'")]
    UnknownPotential(String),
    #[error("invalid parameters for '{name}': {reason}")]
    InvalidParams { name: String, reason: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("measure is not normalized (mass = {0})")]
    NotNormalized(f64),
    #[error("value {0} outside the open unit interval")]
    OutOfUnitInterval(f64),
    #[error("interaction potential '{0}' is not even")]
    NotEven(String),
    #[error("no particle lies inside [{lo}, {hi}]")]
    NoParticlesInside { lo: f64, hi: f64 },
    #[error("particle counts differ ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("support of the source measure is disconnected")]
    DisconnectedSupport,
    #[error("transport map derivative is not positive at x = {0}")]
    NonMonotoneMap(f64),
    #[error("zero density inside the support at x = {0}")]
    ZeroDensityInSupport(f64),
    #[error("every probe produced a vanishing transport distance")]
    AllProbesDegenerate,
    #[error("non-finite drift at x = {0}")]
    NonFiniteDrift(f64),
    #[error("time step {dt} violates the stability guard {limit}")]
    StabilityGuard { dt: f64, limit: f64 },
    #[error("fixed point iteration did not converge in {0} iterations")]
    MaxIterations(usize),
    #[error("fixed point iteration oscillates (change grew for {0} consecutive iterations)")]
    Oscillation(usize),
    #[error("a confining potential or a pinned mean is required")]
    PinRequired,
    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-positive value {0} in a logarithmic fit")]
    NonPositiveValue(f64),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParams {
        name: name.to_string(),
        reason: reason.into(),
    }
}
