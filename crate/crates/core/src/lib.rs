//! Quantum Brownian motion of a test particle coupled to a massless scalar
//! field near a Dirichlet point boundary in 1+1 dimensions.
//!
//! * [`dispersion`]: closed-form velocity and position dispersions.
//! * [`em`]: the electromagnetic plane-boundary counterpart.
//! * [`oracle`]: first-principles reconstruction from the propagator.
//! * [`smearing`]: Gaussian position averaging of the velocity dispersion.
//! * [`numerics`]: quadrature and special functions.
//! * [`cli`], [`verify`]: command-line front end and verification suite.

pub mod cli;
pub mod dispersion;
pub mod em;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod report;
pub mod smearing;
pub mod sweep;
pub mod verify;

pub use dispersion::{
    position_dispersion, subvacuum_window, validity_metric, velocity_dispersion, DispersionKind, DispersionValue,
    MeasuringTime, ParticleConfig,
};
pub use error::{Error, Result};
