use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("shape {name} extends beyond the computational box of half-width {box_halfwidth}")]
    ShapeOutsideBox { name: String, box_halfwidth: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("GMRES did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Mie series not converged with {n_terms} terms (last term ratio {ratio:e})")]
    SeriesNotConverged { n_terms: usize, ratio: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Configuration and input problems versus failures of the numerics.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::SeriesNotConverged { .. } | Error::Eigen(_))
    }
}
