//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grids or reference measures do not match")]
    GridMismatch,

    #[error("total masses differ: {m0} vs {m1}")]
    MassMismatch { m0: f64, m1: f64 },

    #[error("density {value} outside mobility domain [{a}, {b}]")]
    DensityOutOfRange { value: f64, a: f64, b: f64 },

    #[error("curve endpoints do not match cellwise")]
    EndpointMismatch,

    #[error("curves have incompatible time steps: {dt1} vs {dt2}")]
    IncompatibleTimeStep { dt1: f64, dt2: f64 },

    #[error("support escapes the grid box under the requested map")]
    SupportEscapesGrid,

    #[error("no parabola minorant fits this mobility on the verification grid")]
    NoParabolaMinorant,

    #[error("mobility table is not concave (violation {violation} at index {index})")]
    NotConcave { index: usize, violation: f64 },

    #[error("quadrature did not converge to tolerance {tol} (best error {err})")]
    QuadratureDidNotConverge { tol: f64, err: f64 },

    #[error("mollifier radius {radius} invalid for this grid")]
    BadKernelRadius { radius: f64 },

    #[error("smoothing never reached the density bound criterion before t = {t_max}")]
    BoundRhoNeverReached { t_max: f64 },

    #[error("operation needs a converged solver result (status was {status})")]
    NotConverged { status: String },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("{0} is only implemented in dimension {1}")]
    DimensionUnsupported(&'static str, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
