use nalgebra::DVector;
use thiserror::Error;

use crate::geo::GeodesicPath;

pub type Result<T> = std::result::Result<T, Error>;

/// Best iterate carried by a no-convergence error.
#[derive(Debug, Clone)]
pub enum BestIterate {
    Vector(DVector<f64>),
    Path(GeodesicPath),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("jacobian is rank deficient (sigma_min / sigma_max = {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("integration blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        best: Option<Box<BestIterate>>,
    },

    #[error("loss is not finite when perturbing coordinate {coordinate}")]
    NonFiniteLoss { coordinate: usize },

    #[error("rejection sampling acceptance rate {rate:e} is below 1e-4")]
    LowAcceptance { rate: f64 },

    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: usize, to: usize },

    #[error("{context}: {source}")]
    Pair {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("optimization diverged: {0}")]
    Diverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn no_convergence(iterations: usize, residual: f64, best: BestIterate) -> Self {
        Error::NoConvergence {
            iterations,
            residual,
            best: Some(Box::new(best)),
        }
    }

    /// True when this error (or the error it wraps) is a solver no-convergence.
    pub fn is_no_convergence(&self) -> bool {
        match self {
            Error::NoConvergence { .. } => true,
            Error::Pair { source, .. } => source.is_no_convergence(),
            _ => false,
        }
    }
}
