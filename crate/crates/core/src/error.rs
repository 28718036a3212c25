use thiserror::Error;

/// Errors raised by the thermometry toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degeneracy: N0 = {n0} must lie in [1, {max}] for N = {n}", max = .n - 1)]
    InvalidDegeneracy { n: usize, n0: usize },

    #[error("invalid gap {0}: must be finite and > 0")]
    InvalidGap(f64),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid bath: {0}")]
    InvalidBath(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective is flat over [{lo}, {hi}]; no maximum can be bracketed")]
    NoBracket { lo: f64, hi: f64 },

    #[error("state {state} has zero exit rate (absorbing)")]
    AbsorbingState { state: usize },

    #[error("trajectory exceeded the storage cap of {cap} jumps; use the statistics-only mode")]
    TrajectoryOverflow { cap: usize },

    #[error("spectrum does not partition into the two manifolds of the ansatz: {0}")]
    PartitionMismatch(String),

    #[error("no manifold-crossing jumps recorded; the likelihood carries no temperature information")]
    NoJumps,

    #[error("no admissible root of the likelihood equation (k = {k}, l = {l})")]
    InvalidRoot { k: u64, l: u64 },

    #[error("equilibrium population of level {index} underflows to zero")]
    SingularPopulation { index: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures caused by unreadable or malformed input rather than
    /// by the physics of the request.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Json(_))
    }
}
