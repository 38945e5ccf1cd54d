//! Velocity dispersions of an electric charge near a perfectly reflecting
//! plane, kept for side-by-side comparison with the scalar model. Both
//! components share the scalar model's divergence at `tau = 2x`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dispersion::{on_light_cone, DispersionKind, DispersionValue, MeasuringTime};
use crate::error::{require_finite, require_positive, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmParticleConfig {
    e: f64,
    m: f64,
    x: f64,
}

impl EmParticleConfig {
    pub fn new(e: f64, m: f64, x: f64) -> Result<Self> {
        Ok(Self {
            e: require_finite("e", e)?,
            m: require_positive("m", m)?,
            x: require_positive("x", x)?,
        })
    }

    pub fn e(&self) -> f64 {
        self.e
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    fn prefactor(&self) -> f64 {
        let r = self.e / self.m;
        r * r / (PI * PI)
    }
}

/// `ln(((2x + tau)/(2x - tau))^2)` as `2 ln|(2x + tau)/(2x - tau)|`.
fn log_ratio_sq(x: f64, tau: f64) -> f64 {
    2.0 * ((2.0 * x + tau) / (2.0 * x - tau)).abs().ln()
}

/// Perpendicular component `(dv_x)^2`. Tends to `e^2 / (4 pi^2 m^2 x^2)` at
/// late times.
pub fn em_velocity_dispersion_perp(cfg: &EmParticleConfig, tau: MeasuringTime) -> DispersionValue {
    let kind = DispersionKind::VelocitySquared;
    let (x, t) = (cfg.x, tau.value());
    if on_light_cone(x, t) {
        let sentinel = if cfg.e == 0.0 { f64::NAN } else { f64::INFINITY };
        return DispersionValue::singular(kind, sentinel);
    }
    let value = cfg.prefactor() * t / (32.0 * x * x * x) * log_ratio_sq(x, t);
    DispersionValue::regular(kind, value)
}

/// Parallel components `(dv_y)^2 = (dv_z)^2`. These die off at late times.
///
/// The rational term diverges with opposite signs on the two sides of
/// `tau = 2x`, so the sentinel there is NaN.
pub fn em_velocity_dispersion_parallel(cfg: &EmParticleConfig, tau: MeasuringTime) -> DispersionValue {
    let kind = DispersionKind::VelocitySquared;
    let (x, t) = (cfg.x, tau.value());
    if on_light_cone(x, t) {
        return DispersionValue::singular(kind, f64::NAN);
    }
    let log_term = t / (64.0 * x * x * x) * log_ratio_sq(x, t);
    let rational = t * t / (8.0 * x * x * ((t - 2.0 * x) * (t + 2.0 * x)));
    DispersionValue::regular(kind, cfg.prefactor() * (log_term - rational))
}
