use thiserror::Error;

use crate::geometry::GeometryError;
use crate::ife_local::BasisError;
use crate::linsolve::LinsolveError;
use crate::quadrature::QuadratureError;

pub type Result<T> = std::result::Result<T, Error>;

/// Pipeline error with the element or edge context attached where known.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("element {element}: {source}")]
    Basis {
        element: usize,
        #[source]
        source: BasisError,
    },
    #[error("quadrature: {0}")]
    Quadrature(#[from] QuadratureError),
    #[error("linear solver: {0}")]
    Linsolve(#[from] LinsolveError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
