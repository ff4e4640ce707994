use thiserror::Error;

/// Errors raised by the library.
///
/// The variants fall into three groups that the CLI maps onto exit codes:
/// rejected input, infeasibility of a requested construction, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside [0,1]: {0}")]
    Domain(String),

    #[error("invalid digit string: {0}")]
    InvalidDigits(String),

    #[error(
        "point is an endpoint of a fundamental interval (ambiguous digit at position {position})"
    )]
    Ambiguous { position: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined ratio at k = {k}: xi value {xi} is not greater than 1")]
    UndefinedRatio { k: usize, xi: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("growth function does not diverge: {0}")]
    Divergence(String),

    #[error("depth not representable: {0}")]
    DepthOverflow(String),

    #[error("{k} is not in the image of g_{i}")]
    NotInImage { i: usize, k: u64 },

    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),

    #[error("no sign change of cover_sum - 1 on [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("construction state violated: {0}")]
    Corrupted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that signal an infeasible construction rather than bad input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Infeasible(_)
                | Error::Divergence(_)
                | Error::DepthOverflow(_)
                | Error::HorizonTooSmall(_)
                | Error::NoCrossing { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
