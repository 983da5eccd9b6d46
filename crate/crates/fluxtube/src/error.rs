use thiserror::Error;

/// Errors produced by field construction, certificate search, and the
/// radial eigensolver.
#[derive(Debug, Error)]
pub enum FluxtubeError {
    /// An argument lies outside the mathematical domain of the routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// An intermediate quantity left the representable floating-point range.
    #[error("overflow: {0}")]
    Overflow(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    /// An iterative scheme (series, continued fraction, root search)
    /// exhausted its iteration budget.
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    /// The transcendental matching equation has no root in this channel:
    /// the decay-rate target is not below the admissible threshold.
    #[error("no matching root in channel ell={ell}: target {target} >= -nu = {minus_nu}")]
    NoRoot { ell: i64, target: f64, minus_nu: f64 },

    /// A matching root exists but lies below the smallest positive f64;
    /// the channel's decay rate is not representable in double precision.
    #[error("matching root underflows f64 in channel ell={ell}: L({x_floor:.3e}) = {l_at_floor:.6} is already below target {target:.6}")]
    MuUnderflow { ell: i64, x_floor: f64, l_at_floor: f64, target: f64 },

    /// No admissible exponential rate satisfies the self-consistency bound
    /// (only possible when g <= 2 or the flux is non-positive).
    #[error("no admissible exponential rate: {0}")]
    NoAlpha(String),

    /// A field profile violates its structural requirements.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// Grid refinement changed the negative-eigenvalue count; the
    /// discretisation cannot be trusted at this resolution.
    #[error("unstable grid: {0}")]
    UnstableGrid(String),

    /// A run configuration is malformed or internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FluxtubeError>;
