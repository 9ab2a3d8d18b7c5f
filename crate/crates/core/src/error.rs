use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inverse small divisor requested at q = 0")]
    ZeroMode,

    #[error("truncation box contains no nonzero mode")]
    EmptyBox,

    #[error("resonant frequency: omega . q = 0 at q = {0:?}")]
    Resonance(Vec<i64>),

    #[error("potential violates reality: {0}")]
    Reality(String),

    #[error("level {n} needs level {needed}, but the hierarchy stops at {n_max}")]
    MissingLevel { n: usize, needed: usize, n_max: usize },

    #[error("hierarchy has no kappa family")]
    NotExtended,

    #[error("kappa {kappa} outside the grid range [{min}, {max}]")]
    KappaOutOfRange { kappa: f64, min: f64, max: f64 },

    #[error("flow invariant drifted at t = {t}: {what} = {value:e} exceeds {limit:e}")]
    InvariantDrift { t: f64, what: String, value: f64, limit: f64 },

    #[error("Picard iteration did not converge on [{from}, {to}] (last change {change:e})")]
    PicardStalled { from: f64, to: f64, change: f64 },

    #[error("torus zero mode {0:e} exceeds tolerance")]
    ZeroModeDrift(f64),

    #[error("linear solve residual {0:e} too large")]
    LinearSolve(f64),

    #[error("cutoff fixed point is not a contraction (spectral radius {0:.4}); lambda too large")]
    NotContracting(f64),

    #[error("Newton iteration diverged after {iterations} steps (|F| = {residual:e}); lambda is likely beyond the radius")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("Newton iteration did not reach tolerance in {iterations} steps (|F| = {residual:e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
