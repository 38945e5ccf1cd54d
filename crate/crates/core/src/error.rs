use thiserror::Error;

use crate::numerics::SeriesResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {name}: {value} ({requirement})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("light-cone singularity: (x+x')^2 - (t-t')^2 = {argument:e}")]
    LightCone { argument: f64 },

    #[error("adaptive quadrature did not converge: best estimate {value}, error {error:e} after {subdivisions} subdivisions")]
    QuadratureNonConvergence {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("series did not converge after {} terms (error estimate {:e})", .0.terms_used, .0.error_estimate)]
    SeriesNonConvergence(SeriesResult),

    #[error("finite-difference stencil [{lower}, {upper}] touches the singular locus at tau = {tau}")]
    StencilConflict { lower: f64, upper: f64, tau: f64 },

    #[error("overflow evaluating {0}")]
    Overflow(&'static str),

    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            requirement: "must be positive and finite",
        })
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            requirement: "must be finite",
        })
    }
}
