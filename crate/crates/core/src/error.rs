use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "number-basis cutoff cap {cap} reached at r0 = {r0}: discarded weight {tail:e} is not below {tol:e}"
    )]
    Truncation { r0: f64, cap: usize, tail: f64, tol: f64 },

    #[error(
        "local oscillator truncation leakage {leakage:e} exceeds tolerance {tolerance:e}; raise lo_cutoff above {cutoff}"
    )]
    Leakage {
        cutoff: usize,
        leakage: f64,
        tolerance: f64,
    },

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimated error {error:e})")]
    Quadrature { tolerance: f64, error: f64 },

    #[error("spectral decomposition failed: {0}")]
    Spectrum(String),
}

impl Error {
    /// True for failures caused by numerical limits rather than bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
