use thiserror::Error;

/// Errors produced by the pricing and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The observed data carries no usable signal (e.g. all increments zero).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The jump record holds too few jumps for the requested posterior.
    #[error("insufficient jumps: need at least {required}, observed {observed}{note}")]
    InsufficientJumps {
        required: usize,
        observed: usize,
        note: String,
    },

    /// A retained term of the strike-shifted series has a non-positive strike.
    /// The series formula leaves this case undefined, so it is a hard error.
    #[error("series term n={term} has non-positive shifted strike {strike}")]
    ShiftedStrike { term: u32, strike: f64 },

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A custom prior puts no usable mass on the sampling grid.
    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    /// A density underflowed everywhere on the scouting grid.
    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    /// Too many posterior samples were rejected for a trustworthy estimate.
    #[error("unreliable estimate: {0}")]
    Unreliable(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
