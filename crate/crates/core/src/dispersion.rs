//! Closed-form velocity and position dispersions of a scalar-charged test
//! particle held at distance `x` from a Dirichlet point boundary in 1+1
//! dimensions, with the field switched on suddenly at `t = 0`.
//!
//! Everything is expressed through `u = tau / (2x)`, the measuring time in
//! units of the light round trip to the boundary:
//!
//! ```text
//! (dv)^2 =  (g^2 / 2 pi m^2) ln|u^2 - 1|
//! (dx)^2 =  (g^2 x^2 / pi m^2) [ (u^2 - 1) ln|u^2 - 1| - u^2 ]
//! ```
//!
//! The velocity dispersion diverges at `u = 1`; the position dispersion has
//! the removable limit `-(g^2/pi m^2) x^2` there.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{require_finite, require_positive, Result};

/// Test particle: scalar charge `g`, mass `m`, fixed distance `x` from the
/// boundary (natural units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParticleConfig {
    g: f64,
    m: f64,
    x: f64,
}

impl ParticleConfig {
    pub fn new(g: f64, m: f64, x: f64) -> Result<Self> {
        Ok(Self {
            g: require_finite("g", g)?,
            m: require_positive("m", m)?,
            x: require_positive("x", x)?,
        })
    }

    /// Unit charge and mass at distance `x`.
    pub fn unit_coupling(x: f64) -> Result<Self> {
        Self::new(1.0, 1.0, x)
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `g^2 / m^2`, the common prefactor of every dispersion.
    pub fn coupling_sq(&self) -> f64 {
        let r = self.g / self.m;
        r * r
    }

    pub fn with_x(&self, x: f64) -> Result<Self> {
        Self::new(self.g, self.m, x)
    }
}

/// Measuring time: how long the particle has been coupled to the field.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct MeasuringTime(f64);

impl MeasuringTime {
    pub fn new(tau: f64) -> Result<Self> {
        if tau == 0.0 {
            return Ok(Self(0.0));
        }
        require_positive("tau", tau).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionKind {
    VelocitySquared,
    PositionSquared,
}

/// A dispersion value. When `regular` is false the value is a non-finite
/// sentinel and must not be used as a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionValue {
    pub kind: DispersionKind,
    #[serde(serialize_with = "serialize_finite")]
    pub value: f64,
    pub regular: bool,
}

impl DispersionValue {
    pub(crate) fn regular(kind: DispersionKind, value: f64) -> Self {
        Self {
            kind,
            value,
            regular: true,
        }
    }

    pub(crate) fn singular(kind: DispersionKind, sentinel: f64) -> Self {
        debug_assert!(!sentinel.is_finite());
        Self {
            kind,
            value: sentinel,
            regular: false,
        }
    }

    /// The value if regular.
    pub fn finite(&self) -> Option<f64> {
        self.regular.then_some(self.value)
    }
}

pub(crate) fn serialize_finite<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// True when `tau` sits on the round-trip locus `tau = 2x` up to a few ulps.
pub fn on_light_cone(x: f64, tau: f64) -> bool {
    let two_x = 2.0 * x;
    (tau - two_x).abs() <= 4.0 * f64::EPSILON * tau.abs().max(two_x)
}

/// `ln|u^2 - 1|` without cancellation near `u = 0` or `u = 1`.
#[inline]
pub(crate) fn ln_abs_u2_minus_1(u: f64) -> f64 {
    if u.abs() < 0.5 {
        // + 0.0 turns ln_1p(-0) = -0 into +0
        (-u * u).ln_1p() + 0.0
    } else {
        ((u.abs() - 1.0).abs() * (u.abs() + 1.0)).ln()
    }
}

/// Velocity dispersion per unit `g^2/m^2` at raw distance and time. No
/// locus check; returns `-inf` on the light cone and is even in `tau`.
#[inline]
pub(crate) fn velocity_kernel(x: f64, tau: f64) -> f64 {
    ln_abs_u2_minus_1(tau / (2.0 * x)) / (2.0 * PI)
}

/// Velocity dispersion `(dv)^2`.
///
/// Negative (subvacuum) for `0 < tau < 2 sqrt(2) x` except at the divergence
/// `tau = 2x`, where the result is flagged irregular with a `-inf` sentinel.
pub fn velocity_dispersion(cfg: &ParticleConfig, tau: MeasuringTime) -> DispersionValue {
    let kind = DispersionKind::VelocitySquared;
    if on_light_cone(cfg.x, tau.0) {
        let sentinel = if cfg.g == 0.0 { f64::NAN } else { f64::NEG_INFINITY };
        return DispersionValue::singular(kind, sentinel);
    }
    DispersionValue::regular(kind, cfg.coupling_sq() * velocity_kernel(cfg.x, tau.0))
}

/// Position dispersion `(dx)^2`, regular for every `tau` when `x > 0`.
pub fn position_dispersion(cfg: &ParticleConfig, tau: MeasuringTime) -> DispersionValue {
    let kind = DispersionKind::PositionSquared;
    let scale = cfg.coupling_sq() * cfg.x * cfg.x / PI;
    if on_light_cone(cfg.x, tau.0) {
        return DispersionValue::regular(kind, -scale);
    }
    let u = tau.0 / (2.0 * cfg.x);
    let u2_minus_1 = (u - 1.0) * (u + 1.0);
    let bracket = u2_minus_1 * ln_abs_u2_minus_1(u) - u * u;
    DispersionValue::regular(kind, scale * bracket)
}

/// Open interval of measuring times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauInterval {
    pub lower: f64,
    pub upper: f64,
}

impl TauInterval {
    pub fn contains(&self, tau: f64) -> bool {
        tau > self.lower && tau < self.upper
    }
}

/// Range `(0, 2 sqrt(2) x)` of measuring times with negative velocity
/// dispersion (apart from the divergence at `tau = 2x`).
pub fn subvacuum_window(cfg: &ParticleConfig) -> TauInterval {
    TauInterval {
        lower: 0.0,
        upper: 2.0 * SQRT_2 * cfg.x,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumClass {
    Subvacuum,
    Vacuum,
    AboveVacuum,
    Singular,
}

pub fn classify(v: &DispersionValue) -> VacuumClass {
    match v.finite() {
        None => VacuumClass::Singular,
        Some(x) if x < 0.0 => VacuumClass::Subvacuum,
        Some(x) if x > 0.0 => VacuumClass::AboveVacuum,
        Some(_) => VacuumClass::Vacuum,
    }
}

/// How far the fixed-position approximation is from breaking down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidityMetric {
    /// `|(dx)^2| / x^2` at the requested time.
    pub relative_position_dispersion: f64,
    /// `g^2 / (pi m^2)`, the same ratio at `tau = 2x`, independent of `x`.
    pub global_constraint: f64,
}

impl ValidityMetric {
    pub fn within(&self, threshold: f64) -> bool {
        self.relative_position_dispersion < threshold && self.global_constraint < threshold
    }
}

pub fn validity_metric(cfg: &ParticleConfig, tau: MeasuringTime) -> ValidityMetric {
    let dx2 = position_dispersion(cfg, tau).value;
    ValidityMetric {
        relative_position_dispersion: dx2.abs() / (cfg.x * cfg.x),
        global_constraint: cfg.coupling_sq() / PI,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64) -> ParticleConfig {
        ParticleConfig::unit_coupling(x).unwrap()
    }

    fn tau(t: f64) -> MeasuringTime {
        MeasuringTime::new(t).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(ParticleConfig::new(1.0, 0.0, 1.0).is_err());
        assert!(ParticleConfig::new(1.0, 1.0, 0.0).is_err());
        assert!(ParticleConfig::new(1.0, 1.0, -2.0).is_err());
        assert!(ParticleConfig::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(ParticleConfig::new(0.0, 1.0, 1.0).is_ok());
        assert!(MeasuringTime::new(-1.0).is_err());
        assert!(MeasuringTime::new(0.0).is_ok());
    }

    #[test]
    fn velocity_anchor_values() {
        let cfg = unit(1.0);
        assert!(velocity_dispersion(&cfg, tau(2.0 * SQRT_2)).value.abs() < 1e-15);
        assert_eq!(velocity_dispersion(&cfg, tau(0.0)).value, 0.0);

        let expected = -(16.0_f64 / 9.0).ln() / (4.0 * PI);
        assert!(rel(velocity_dispersion(&cfg, tau(1.0)).value, expected) < 1e-14);
        assert!((expected + 0.045787).abs() < 1e-6);

        let expected = 9.0_f64.ln() / (4.0 * PI);
        assert!(rel(velocity_dispersion(&cfg, tau(4.0)).value, expected) < 1e-14);
        assert!((expected - 0.174850).abs() < 1e-6);
    }

    #[test]
    fn velocity_singular_locus() {
        let v = velocity_dispersion(&unit(1.0), tau(2.0));
        assert!(!v.regular);
        assert!(!v.value.is_finite());
        assert_eq!(v.finite(), None);

        // 0.1 + 0.2 style rounding still lands on the locus
        let x = 0.1 + 0.2;
        assert!(!velocity_dispersion(&unit(x), tau(0.6)).regular);
        assert!(velocity_dispersion(&unit(1.0), tau(2.0 + 1e-12)).regular);
    }

    #[test]
    fn position_anchor_values() {
        for &x in &[0.3, 1.0, 7.5] {
            let cfg = ParticleConfig::new(0.4, 2.0, x).unwrap();
            let v = position_dispersion(&cfg, tau(2.0 * x));
            assert!(v.regular);
            let expected = -(0.2_f64 * 0.2) / PI * x * x;
            assert!(rel(v.value, expected) < 1e-12);
        }
        assert_eq!(position_dispersion(&unit(1.0), tau(0.0)).value, 0.0);
    }

    #[test]
    fn position_is_continuous_across_the_locus() {
        let cfg = unit(1.0);
        let at = position_dispersion(&cfg, tau(2.0)).value;
        for d in [1e-6, 1e-9] {
            let lo = position_dispersion(&cfg, tau(2.0 - d)).value;
            let hi = position_dispersion(&cfg, tau(2.0 + d)).value;
            assert!((lo - at).abs() < 1e-4 && (hi - at).abs() < 1e-4);
        }
    }

    #[test]
    fn position_matches_literal_formula() {
        // (g^2 / 8 pi m^2) [(t^2 - 4x^2) ln(((t^2 - 4x^2)/4x^2)^2) - 2 t^2]
        let (g, m, x) = (0.7, 1.3, 0.9);
        let cfg = ParticleConfig::new(g, m, x).unwrap();
        for &t in &[0.3, 1.0, 1.7, 2.5, 9.0] {
            let d = t * t - 4.0 * x * x;
            let literal = g * g / (8.0 * PI * m * m) * (d * ((d / (4.0 * x * x)).powi(2)).ln() - 2.0 * t * t);
            assert!(rel(position_dispersion(&cfg, tau(t)).value, literal) < 1e-12);
        }
    }

    #[test]
    fn subvacuum_window_scales_with_x() {
        let w = subvacuum_window(&unit(1.0));
        assert_eq!(w.lower, 0.0);
        assert!((w.upper - 2.0 * SQRT_2).abs() < 1e-15);
        let w = subvacuum_window(&unit(0.5));
        assert!((w.upper - SQRT_2).abs() < 1e-15);
        assert!(w.contains(1.0) && !w.contains(0.0) && !w.contains(SQRT_2));
    }

    #[test]
    fn sign_flips_only_at_window_edge() {
        let cfg = unit(1.0);
        let edge = subvacuum_window(&cfg).upper;
        for i in 1..=39 {
            let t = 0.1 * f64::from(i);
            let v = velocity_dispersion(&cfg, tau(t));
            if on_light_cone(1.0, t) {
                continue;
            }
            assert_eq!(v.value < 0.0, t < edge, "tau={t}");
        }
    }

    #[test]
    fn validity_metric_quoted_values() {
        let cfg = ParticleConfig::new(0.1, 1.0, 1.0).unwrap();
        let v = validity_metric(&cfg, tau(10.0));
        assert!((v.relative_position_dispersion - 0.163).abs() < 1e-3);
        assert!((v.global_constraint - 0.01 / PI).abs() < 1e-16);

        let cfg = ParticleConfig::new(0.01, 1.0, 1.0).unwrap();
        let v = validity_metric(&cfg, tau(50.0));
        assert!((v.relative_position_dispersion - 0.11).abs() / 0.11 < 0.05);
        assert!(v.within(0.2));
        assert!(!v.within(0.1));

        let cfg = ParticleConfig::new(0.0, 1.0, 1.0).unwrap();
        for t in [0.0, 1.0, 2.0, 30.0] {
            let v = validity_metric(&cfg, tau(t));
            assert_eq!(v.relative_position_dispersion, 0.0);
            assert_eq!(v.global_constraint, 0.0);
        }
    }

    #[test]
    fn classification() {
        let cfg = unit(1.0);
        assert_eq!(classify(&velocity_dispersion(&cfg, tau(1.0))), VacuumClass::Subvacuum);
        assert_eq!(classify(&velocity_dispersion(&cfg, tau(2.0))), VacuumClass::Singular);
        assert_eq!(classify(&velocity_dispersion(&cfg, tau(5.0))), VacuumClass::AboveVacuum);
        assert_eq!(classify(&velocity_dispersion(&cfg, tau(0.0))), VacuumClass::Vacuum);
    }

    #[test]
    fn velocity_kernel_is_even_in_tau() {
        for &t in &[0.1, 1.0, 2.5, 17.0] {
            assert_eq!(velocity_kernel(1.3, t), velocity_kernel(1.3, -t));
        }
    }
}
