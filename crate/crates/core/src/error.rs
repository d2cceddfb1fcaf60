use thiserror::Error;

/// Errors raised by the numerical modules.
///
/// The variants fall into two families: input problems (`Domain`, `Config`,
/// `Usage`, `Precondition`, `Unsupported`, `Admissibility`) and numerical
/// failures (everything else). [`Error::is_input_error`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("inadmissible parameter: {0}")]
    Admissibility(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// The semilinear Poisson equation was integrated to the radius cap
    /// without the central value `z` crossing zero.
    #[error("infinite-radius: z stayed positive up to r = {r_reached:.6e} (cap {r_cap:.6e}); the equation of state does not give a compactly supported star")]
    InfiniteRadius { r_reached: f64, r_cap: f64 },

    #[error("mass unreachable: target {target:.6e} not bracketed by the kappa scan\n{table}")]
    MassUnreachable { target: f64, table: String },

    #[error("membership error: {0}")]
    Membership(String),

    #[error("mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Config(_)
                | Error::Usage(_)
                | Error::Precondition(_)
                | Error::Unsupported(_)
                | Error::Admissibility(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
