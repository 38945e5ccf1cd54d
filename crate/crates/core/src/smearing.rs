//! Velocity dispersion averaged over a Gaussian fluctuation of the particle
//! position, `x -> x + eps` with `eps ~ N(0, sigma^2)`.
//!
//! With `c0 = -x`, `c1 = tau/2 - x`, `c2 = -tau/2 - x` the unsmeared
//! dispersion per unit `g^2/m^2` is
//!
//! ```text
//! (1/2pi) [ ln|c1 - eps| + ln|eps - c2| - 2 ln|eps - c0| ]
//! ```
//!
//! so every singularity is a plain logarithm, integrable against the
//! Gaussian. The average is finite for all `tau`, including `tau = 2x`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::{serialize_finite, MeasuringTime, ParticleConfig};
use crate::error::{require_positive, Error, Result};
use crate::numerics::{adaptive_quad, hyp2f2_1_1_3h_2, QuadratureSpec};
use crate::sweep::{SweepGrid, SweepVariable};

pub const DEFAULT_N_SIGMA: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmearingConfig {
    sigma: f64,
    n_sigma: f64,
}

impl SmearingConfig {
    pub fn new(sigma: f64, n_sigma: f64) -> Result<Self> {
        Ok(Self {
            sigma: require_positive("sigma", sigma)?,
            n_sigma: require_positive("n_sigma", n_sigma)?,
        })
    }

    pub fn with_sigma(sigma: f64) -> Result<Self> {
        Self::new(sigma, DEFAULT_N_SIGMA)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn n_sigma(&self) -> f64 {
        self.n_sigma
    }

    pub fn half_width(&self) -> f64 {
        self.sigma * self.n_sigma
    }

    /// Gaussian mass discarded by the window is below `exp(-n_sigma^2 / 2)`.
    pub fn truncation_bound(&self) -> f64 {
        (-0.5 * self.n_sigma * self.n_sigma).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmearedValue {
    pub value: f64,
    pub error_estimate: f64,
    /// The boundary contact point `eps = -x` lies inside the window. The
    /// average is still finite but the fixed-boundary model is doubtful there.
    pub boundary_in_window: bool,
    pub truncation_bound: f64,
}

/// Singular offsets `(c0, c1, c2)`.
fn offsets(x: f64, tau: f64) -> [f64; 3] {
    [-x, 0.5 * tau - x, -0.5 * tau - x]
}

/// Unsmeared dispersion per unit coupling at position `x + eps`.
#[inline]
fn shifted_kernel(c: &[f64; 3], eps: f64) -> f64 {
    let [c0, c1, c2] = *c;
    ((c1 - eps).abs().ln() + (eps - c2).abs().ln() - 2.0 * (eps - c0).abs().ln()) / (2.0 * PI)
}

fn smeared_raw(x: f64, tau: f64, s: &SmearingConfig, q: &QuadratureSpec) -> Result<SmearedValue> {
    let half = s.half_width();
    let c = offsets(x, tau);
    let norm = 1.0 / ((2.0 * PI).sqrt() * s.sigma);
    let inv_two_var = 0.5 / (s.sigma * s.sigma);

    let mut spec = q.clone();
    spec.singularities.extend(c.iter().copied().filter(|p| p.abs() <= half));
    let r = adaptive_quad(
        |eps| shifted_kernel(&c, eps) * norm * (-eps * eps * inv_two_var).exp(),
        -half,
        half,
        &spec,
    )?;
    Ok(SmearedValue {
        value: r.value,
        error_estimate: r.error,
        boundary_in_window: x <= half,
        truncation_bound: s.truncation_bound(),
    })
}

/// Gaussian average of the velocity dispersion over `[-n_sigma sigma,
/// n_sigma sigma]`, by adaptive quadrature with the three logarithmic
/// singularities declared.
pub fn smeared_velocity_dispersion(
    cfg: &ParticleConfig,
    tau: MeasuringTime,
    s: &SmearingConfig,
    q: &QuadratureSpec,
) -> Result<SmearedValue> {
    if tau.value() == 0.0 {
        return Ok(SmearedValue {
            value: 0.0,
            error_estimate: 0.0,
            boundary_in_window: cfg.x() <= s.half_width(),
            truncation_bound: s.truncation_bound(),
        });
    }
    let unit = smeared_raw(cfg.x(), tau.value(), s, q)?;
    let c = cfg.coupling_sq();
    Ok(SmearedValue {
        value: c * unit.value,
        error_estimate: c * unit.error_estimate,
        ..unit
    })
}

/// Small-width law at the round trip: `(g^2 / 4pi m^2) ln(2 sigma^2 / x^2)`.
pub fn smeared_well_depth_asymptote(cfg: &ParticleConfig, s: &SmearingConfig) -> f64 {
    let r = s.sigma / cfg.x();
    cfg.coupling_sq() / (4.0 * PI) * (2.0 * r * r).ln()
}

/// `E[ln|mu + sigma Z|] - ln sigma + (gamma + ln 2)/2` for standard normal
/// `Z`, which equals `z 2F2(1,1;3/2,2;-z)` with `z = mu^2 / 2 sigma^2`.
fn gaussian_log_moment_shift(mu: f64, sigma: f64, tol: f64) -> Result<f64> {
    let z = mu * mu / (2.0 * sigma * sigma);
    Ok(z * hyp2f2_1_1_3h_2(-z, tol)?.value)
}

/// Full-line Gaussian average expressed through `2F2(1,1;3/2,2;z)`.
///
/// Each logarithm averages to `ln sigma - (gamma + ln 2)/2 + z 2F2(..;-z)`;
/// the constant parts cancel between the three terms. This is a cross-check
/// of the quadrature path only: the series is summed directly, so it is
/// usable while every `z = c^2 / 2 sigma^2` stays below about 20.
pub fn smeared_velocity_dispersion_series(
    cfg: &ParticleConfig,
    tau: MeasuringTime,
    sigma: f64,
    tol: f64,
) -> Result<f64> {
    let sigma = require_positive("sigma", sigma)?;
    let [c0, c1, c2] = offsets(cfg.x(), tau.value());
    let terms = gaussian_log_moment_shift(c1, sigma, tol)? + gaussian_log_moment_shift(c2, sigma, tol)?
        - 2.0 * gaussian_log_moment_shift(c0, sigma, tol)?;
    Ok(cfg.coupling_sq() * terms / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub tau_over_x: f64,
    #[serde(serialize_with = "serialize_option_finite")]
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub failure: Option<String>,
}

fn serialize_option_finite<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_finite(x, s),
        None => s.serialize_none(),
    }
}

/// Smeared dispersion along a `tau/x` grid. Rows are computed in parallel and
/// returned in grid order; a failing row is flagged and the sweep continues.
pub fn smeared_curve(
    cfg: &ParticleConfig,
    s: &SmearingConfig,
    grid: &SweepGrid,
    q: &QuadratureSpec,
) -> Result<Vec<CurveRow>> {
    if grid.variable != SweepVariable::TauOverX {
        return Err(Error::InvalidGrid("smeared curve needs a tau_over_x grid".into()));
    }
    if grid.start <= 0.0 {
        return Err(Error::InvalidGrid("smeared curve needs strictly positive tau".into()));
    }
    let x = cfg.x();
    let rows = grid
        .points()
        .into_par_iter()
        .map(|r| {
            let outcome = MeasuringTime::new(r * x).and_then(|tau| smeared_velocity_dispersion(cfg, tau, s, q));
            match outcome {
                Ok(v) => CurveRow {
                    tau_over_x: r,
                    value: Some(v.value),
                    error_estimate: Some(v.error_estimate),
                    failure: None,
                },
                Err(e) => CurveRow {
                    tau_over_x: r,
                    value: None,
                    error_estimate: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(rows)
}
