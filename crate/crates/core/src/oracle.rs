//! Independent numerical reconstruction of the dispersions from the
//! renormalized propagator.
//!
//! The coincidence-limit formula differentiates the time-integrated
//! propagator with respect to both particle positions. The derivatives are
//! taken by central finite differences on the already integrated quantity:
//! differentiating under the integral would produce a non-integrable
//! `1/(eta - 2x)^2` kernel once `tau > 2x`.
//!
//! Only the imaginary part of the Feynman propagator survives, and with the
//! infrared constant dropped it reads `(1/4pi) ln|(x+x')^2 - (t-t')^2|`.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::{DispersionKind, DispersionValue, MeasuringTime, ParticleConfig};
use crate::error::{require_positive, Error, Result};
use crate::numerics::{adaptive_quad, QuadratureResult, QuadratureSpec};

/// Two spacetime points `(x, t)` and `(x', t')` on the half line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacetimePair {
    pub x: f64,
    pub t: f64,
    pub x_prime: f64,
    pub t_prime: f64,
}

impl SpacetimePair {
    pub fn new(x: f64, t: f64, x_prime: f64, t_prime: f64) -> Result<Self> {
        require_positive("x", x)?;
        require_positive("x'", x_prime)?;
        crate::error::require_finite("t", t)?;
        crate::error::require_finite("t'", t_prime)?;
        Ok(Self { x, t, x_prime, t_prime })
    }
}

/// Normalized Dirichlet mode `(2 pi^2)^{-1/2} e^{-i omega t} sin(k x)`.
pub fn mode_function(omega: f64, k: f64, x: f64, t: f64) -> Complex64 {
    let amplitude = (k * x).sin() / (2.0 * PI * PI).sqrt();
    Complex64::from_polar(1.0, -omega * t) * amplitude
}

/// `ln|s^2 - eta^2| / 4pi`, split into two logarithms so that the value near
/// `eta = s` keeps full relative accuracy.
#[inline]
pub(crate) fn log_kernel(s: f64, eta: f64) -> f64 {
    ((s - eta).abs().ln() + (s + eta).abs().ln()) / (4.0 * PI)
}

/// Imaginary part of the renormalized Feynman propagator between the two
/// points, `(1/4pi) ln|(x+x')^2 - (t-t')^2|`.
pub fn kernel_im_gf(p: &SpacetimePair) -> Result<f64> {
    let s = p.x + p.x_prime;
    let dt = p.t - p.t_prime;
    let argument = (s - dt) * (s + dt);
    if argument.abs() < f64::MIN_POSITIVE {
        return Err(Error::LightCone { argument });
    }
    Ok(log_kernel(s, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    /// `[f(x+h,x'+h) - f(x+h,x'-h) - f(x-h,x'+h) + f(x-h,x'-h)] / 4h^2`
    CentralMixed4Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteDifferenceSpec {
    pub step: f64,
    pub scheme: FdScheme,
}

impl FiniteDifferenceSpec {
    pub fn new(step: f64) -> Result<Self> {
        Ok(Self {
            step: require_positive("finite-difference step", step)?,
            scheme: FdScheme::CentralMixed4Point,
        })
    }

    /// Default step `1e-3 x`.
    pub fn for_distance(x: f64) -> Result<Self> {
        Self::new(1e-3 * x)
    }
}

/// A dispersion reconstructed numerically, with the quadrature error
/// propagated through the finite difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub dispersion: DispersionValue,
    pub error_estimate: f64,
}

/// `2 int_0^tau (tau - eta) f(eta) d eta`, which equals
/// `int_0^tau int_0^tau f(|z - y|) dz dy`.
pub fn reduced_double_integral<F>(f: F, tau: f64, q: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    let r = adaptive_quad(|eta| (tau - eta) * f(eta), 0.0, tau, q)?;
    Ok(QuadratureResult {
        value: 2.0 * r.value,
        error: 2.0 * r.error,
        ..r
    })
}

/// Double time integral of the propagator kernel over `[0, tau]^2`,
/// reduced to one dimension. The logarithmic singularity at
/// `eta = x + x'` is declared whenever it falls in the range. Depends on
/// the positions only through `x + x'`, hence symmetric exactly.
pub fn double_time_integral(x: f64, x_prime: f64, tau: MeasuringTime, q: &QuadratureSpec) -> Result<QuadratureResult> {
    let s = x + x_prime;
    require_positive("x + x'", s)?;
    let mut spec = q.clone();
    spec.singularities.push(s);
    reduced_double_integral(|eta| log_kernel(s, eta), tau.value(), &spec)
}

/// Mixed central difference `d^2 f / dx dx'` at `(x, x')` with step `h`.
/// Returns the difference quotient and the sum of the absolute input errors
/// scaled the same way.
fn mixed_central_difference<F>(f: F, x: f64, x_prime: f64, h: f64) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> Result<QuadratureResult>,
{
    let pp = f(x + h, x_prime + h)?;
    let pm = f(x + h, x_prime - h)?;
    let mp = f(x - h, x_prime + h)?;
    let mm = f(x - h, x_prime - h)?;
    let denom = 4.0 * h * h;
    let value = ((pp.value - pm.value) - (mp.value - mm.value)) / denom;
    let error = (pp.error + pm.error + mp.error + mm.error) / denom;
    Ok((value, error))
}

fn check_step(x: f64, fd: &FiniteDifferenceSpec) -> Result<f64> {
    let h = fd.step;
    if x - h <= 0.0 {
        return Err(Error::Domain {
            name: "finite-difference step",
            value: h,
            requirement: "must be smaller than the distance x",
        });
    }
    Ok(h)
}

/// Velocity dispersion from the mixed position derivative of the double
/// time integral of the propagator kernel.
///
/// The stencil samples `x + x'` at `2x - 2h`, `2x`, `2x + 2h`; it must not
/// straddle the round-trip locus `tau = 2x`.
pub fn velocity_dispersion_oracle(
    cfg: &ParticleConfig,
    tau: MeasuringTime,
    fd: &FiniteDifferenceSpec,
    q: &QuadratureSpec,
) -> Result<OracleValue> {
    let x = cfg.x();
    let h = check_step(x, fd)?;
    let (lower, upper) = (2.0 * (x - h), 2.0 * (x + h));
    let t = tau.value();
    let margin = 4.0 * f64::EPSILON * upper;
    if t >= lower - margin && t <= upper + margin {
        return Err(Error::StencilConflict { lower, upper, tau: t });
    }

    let (d2, err) = mixed_central_difference(|a, b| double_time_integral(a, b, tau, q), x, x, h)?;
    let c = cfg.coupling_sq();
    Ok(OracleValue {
        dispersion: DispersionValue::regular(DispersionKind::VelocitySquared, c * d2),
        error_estimate: c * err,
    })
}

/// Double integral of the kernel over the rectangle `[0, t1] x [0, t2]`,
/// reduced to one dimension through the overlap length
/// `rho(eta) = |{t' in [0, t2] : t' + eta in [0, t1]}|`.
pub fn truncated_double_time_integral(
    x: f64,
    x_prime: f64,
    t1: f64,
    t2: f64,
    q: &QuadratureSpec,
) -> Result<QuadratureResult> {
    let s = x + x_prime;
    require_positive("x + x'", s)?;
    let overlap = |eta: f64| (t2.min(t1 - eta) - (-eta).max(0.0)).max(0.0);
    let mut spec = q.clone();
    spec.singularities.extend([-s, s, 0.0, t1 - t2]);
    adaptive_quad(|eta| overlap(eta) * log_kernel(s, eta), -t2, t1, &spec)
}

/// Unequal-time velocity correlation `<v(t1) v(t2)>`, from the mixed
/// position derivative of [`truncated_double_time_integral`].
pub fn velocity_correlation(
    cfg: &ParticleConfig,
    t1: f64,
    t2: f64,
    fd: &FiniteDifferenceSpec,
    q: &QuadratureSpec,
) -> Result<f64> {
    let x = cfg.x();
    let h = check_step(x, fd)?;
    // W depends on x + x' only, so the two middle points of the mixed stencil
    // coincide and one evaluation serves both.
    let w = |s: f64| truncated_double_time_integral(0.5 * s, 0.5 * s, t1, t2, q).map(|r| r.value);
    let centre = w(2.0 * x)?;
    let d2 = ((w(2.0 * (x + h))? - centre) - (centre - w(2.0 * (x - h))?)) / (4.0 * h * h);
    Ok(cfg.coupling_sq() * d2)
}

const CORRELATION_REL_TOL: f64 = 1e-5;

/// Position dispersion as the double time integral of the numerically
/// evaluated velocity correlation over `[0, tau]^2`.
///
/// The correlation is symmetric under `t1 <-> t2`, so only the triangle
/// `t2 <= t1` is integrated. It has logarithmic ridges along `t1 = s`,
/// `t2 = s` and `t1 - t2 = s` (`s` ranging over the stencil values of
/// `x + x'`), which are declared to the nested quadratures.
pub fn position_dispersion_oracle(
    cfg: &ParticleConfig,
    tau: MeasuringTime,
    fd: &FiniteDifferenceSpec,
    q: &QuadratureSpec,
) -> Result<OracleValue> {
    let x = cfg.x();
    let h = check_step(x, fd)?;
    let t = tau.value();
    let kind = DispersionKind::PositionSquared;
    if t == 0.0 {
        return Ok(OracleValue {
            dispersion: DispersionValue::regular(kind, 0.0),
            error_estimate: 0.0,
        });
    }

    let unit = ParticleConfig::unit_coupling(x)?;
    let stencil = [2.0 * (x - h), 2.0 * x, 2.0 * (x + h)];
    let outer_abs = 1e-12 * t * t;

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        f64::NAN
    };

    let inner_error = RefCell::new(0.0_f64);
    let inner = |t1: f64| -> f64 {
        let points = stencil.iter().flat_map(|&s| [s, t1 - s]);
        let spec = QuadratureSpec {
            abs_tol: outer_abs,
            rel_tol: CORRELATION_REL_TOL,
            max_subdivisions: q.max_subdivisions,
            singularities: points.collect(),
        };
        let integrand = |t2: f64| match velocity_correlation(&unit, t1, t2, fd, q) {
            Ok(v) => v,
            Err(e) => record(e),
        };
        match adaptive_quad(integrand, 0.0, t1, &spec) {
            Ok(r) => {
                let mut acc = inner_error.borrow_mut();
                *acc = acc.max(r.error);
                r.value
            }
            Err(e) => record(e),
        }
    };

    let outer_spec = QuadratureSpec {
        abs_tol: outer_abs,
        rel_tol: CORRELATION_REL_TOL,
        max_subdivisions: q.max_subdivisions,
        singularities: stencil.iter().flat_map(|&s| [s, 2.0 * s]).collect(),
    };
    let outer = adaptive_quad(inner, 0.0, t, &outer_spec);

    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    let c = cfg.coupling_sq();
    let error = 2.0 * (outer.error + t * inner_error.into_inner());
    Ok(OracleValue {
        dispersion: DispersionValue::regular(kind, 2.0 * c * outer.value),
        error_estimate: c * error,
    })
}
