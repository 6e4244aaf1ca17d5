use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("normal matrix is singular or rank deficient; use lambda > 0")]
    SingularSystem,

    #[error("irradiance {0:e} is too small to recover the diffuse term")]
    DegenerateIrradiance(f64),

    #[error("non-finite loss at iteration {iteration}; input radiance is likely corrupt")]
    NonFiniteLoss { iteration: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("LDR input rejected ({0}); an HDR image is required")]
    NonHdrInput(String),

    #[error("texture layouts differ: {0}")]
    LayoutMismatch(String),

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("exr: {0}")]
    Exr(#[from] exr::error::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Input errors map to exit code 2, numerical failures to 3.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem | Error::DegenerateIrradiance(_) | Error::NonFiniteLoss { .. }
        )
    }
}
