//! Successive-approximation solver for viscous Burgers on the periodic torus,
//! with the norm calculus and numerical bound checks built around it.

pub mod fields;
pub mod forcing;
pub mod heat;
pub mod linalg;
pub mod norms;
pub mod oracle;
pub mod scheme;
mod spectral;
pub mod transport;
pub mod verify;

pub use fields::{GridSpec, ScalarField, Trajectory, VectorField};
pub use forcing::{Forcing, Modulation};

/// Errors raised by the solver and the checks.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("spectral blocking at t = {time}: top-third energy fraction {fraction:e}")]
    SpectralBlocking { time: f64, fraction: f64 },
    #[error("divergence at t = {time}: {detail}")]
    Divergence { time: f64, detail: String },
    #[error("window: {0}")]
    Window(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("iterate {m}: {source}")]
    Iterate { m: usize, source: Box<Error> },
    #[error("oracle failure at t = {time}: {detail}")]
    OracleFailure { time: f64, detail: String },
    #[error("transform constant {lambda} leaves residual {residual:e}; best fit is {best_lambda}")]
    Convention {
        lambda: f64,
        residual: f64,
        best_lambda: f64,
    },
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for numerical blow-up, including when wrapped by an iterate index.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::SpectralBlocking { .. } => true,
            Error::Iterate { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
