//! Self-verification suite: closed forms against the propagator oracle,
//! finite-difference convergence, numerics self-tests and the smearing
//! asymptotics. Each check is independent; they run concurrently and are
//! reported in a fixed order.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use crate::dispersion::{
    on_light_cone, position_dispersion, validity_metric, velocity_dispersion, MeasuringTime, ParticleConfig,
};
use crate::em::{em_velocity_dispersion_parallel, em_velocity_dispersion_perp, EmParticleConfig};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_quad, hyp2f2_1_1_3h_2, pochhammer, QuadratureSpec};
use crate::oracle::{position_dispersion_oracle, velocity_dispersion_oracle, FiniteDifferenceSpec};
use crate::report::CheckOutcome;
use crate::smearing::{
    smeared_velocity_dispersion, smeared_velocity_dispersion_series, smeared_well_depth_asymptote, SmearingConfig,
};

/// `tau / x` values at which the oracle is compared with the closed forms.
pub const ORACLE_GRID: [f64; 7] = [0.25, 0.5, 1.0, 1.5, 2.5, 3.0, 4.0];
pub const FAST_VELOCITY_GRID: [f64; 3] = [0.5, 1.0, 3.0];
pub const FAST_POSITION_GRID: [f64; 1] = [1.0];

pub const VELOCITY_ORACLE_TOL: f64 = 1e-3;
pub const POSITION_ORACLE_TOL: f64 = 1e-2;
pub const SCALING_TOL: f64 = 1e-12;
pub const SCALING_FACTORS: [f64; 3] = [0.5, 2.0, 10.0];

/// Step pair `(2h, h)` in units of `x` for the observed-order check. Smaller
/// steps let quadrature noise swamp the truncation error.
pub const RICHARDSON_STEP: f64 = 0.01;
pub const RICHARDSON_BAND: (f64, f64) = (3.8, 4.2);

/// `2F2(1,1;3/2,2;1)`, from a 30-digit reference evaluation.
pub const HYP2F2_AT_ONE: f64 = 1.445_245_613_388_347_2;

pub const SMEARING_WIDTHS: [f64; 4] = [0.2, 0.1, 0.05, 0.02];
pub const SMEARING_MONOTONE_WIDTHS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];
pub const WELL_DEPTH_TOL: f64 = 0.1;

/// Relative size of the deliberate closed-form error used to prove the suite
/// can fail.
pub const CANARY_PERTURBATION: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Particle distance. Checks run at unit coupling since every dispersion
    /// is proportional to `g^2 / m^2`.
    pub x: f64,
    pub fast: bool,
    /// Replaces the oracle grid (in units of `x`).
    pub grid: Option<Vec<f64>>,
    /// Relative perturbation applied to the closed-form velocity dispersion.
    pub perturbation: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            x: 1.0,
            fast: false,
            grid: None,
            perturbation: 0.0,
            quadrature: QuadratureSpec::default(),
        }
    }
}

fn rel_err(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs()
    }
}

fn tau(t: f64) -> Result<MeasuringTime> {
    MeasuringTime::new(t)
}

/// Closed-form velocity dispersion as seen by the suite, including any
/// injected perturbation.
fn velocity_under_test(cfg: &ParticleConfig, t: f64, perturbation: f64) -> Result<f64> {
    let v = velocity_dispersion(cfg, tau(t)?);
    v.finite().map(|v| v * (1.0 + perturbation)).ok_or(Error::Domain {
        name: "tau",
        value: t,
        requirement: "must avoid the singular locus tau = 2x",
    })
}

fn or_fail(name: &str, r: Result<CheckOutcome>) -> CheckOutcome {
    r.unwrap_or_else(|e| CheckOutcome::failed(name, e.to_string()))
}

type Integrand = Box<dyn Fn(f64) -> f64>;

type Job<'a> = Box<dyn Fn() -> Vec<CheckOutcome> + Send + Sync + 'a>;

/// Run every check and return the outcomes in a stable order.
pub fn run_checks(opts: &VerifyOptions) -> Vec<CheckOutcome> {
    let cfg = match ParticleConfig::unit_coupling(opts.x) {
        Ok(c) => c,
        Err(e) => return vec![CheckOutcome::failed("configuration", e.to_string())],
    };
    let p = opts.perturbation;
    let q = &opts.quadrature;

    let (velocity_grid, position_grid): (Vec<f64>, Vec<f64>) = match (&opts.grid, opts.fast) {
        (Some(g), _) => (
            g.clone(),
            if opts.fast {
                g.iter().copied().take(1).collect()
            } else {
                g.clone()
            },
        ),
        (None, true) => (FAST_VELOCITY_GRID.to_vec(), FAST_POSITION_GRID.to_vec()),
        (None, false) => (ORACLE_GRID.to_vec(), ORACLE_GRID.to_vec()),
    };

    let mut jobs: Vec<Job> = vec![
        Box::new(move || anchor_checks(&cfg)),
        Box::new(move || vec![sign_scan(&cfg)]),
        Box::new(move || scaling_checks(&cfg, p)),
    ];
    for &r in &velocity_grid {
        jobs.push(Box::new(move || vec![velocity_oracle_check(&cfg, r, p, q)]));
    }
    for &r in &position_grid {
        jobs.push(Box::new(move || vec![position_oracle_check(&cfg, r, q)]));
    }
    if !opts.fast {
        for &r in &velocity_grid {
            jobs.push(Box::new(move || vec![richardson_check(&cfg, r, p, q)]));
        }
    }
    jobs.push(Box::new(numerics_checks));
    jobs.push(Box::new(move || smearing_checks(&cfg, q)));
    jobs.push(Box::new(em_checks));

    jobs.par_iter().map(|job| job()).collect::<Vec<_>>().concat()
}

fn anchor_checks(cfg: &ParticleConfig) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    for &x in &[0.5, 1.0, 3.0] {
        let name = format!("anchor position tau=2x x={x}");
        out.push(or_fail(
            &name,
            (|| {
                let c = cfg.with_x(x)?;
                let expected = -c.coupling_sq() / PI * x * x;
                let v = position_dispersion(&c, tau(2.0 * x)?);
                Ok(CheckOutcome::at_most(
                    &name,
                    rel_err(v.value, expected),
                    1e-12,
                    "vs -(g/m)^2 x^2 / pi",
                ))
            })(),
        ));
    }
    out.push(or_fail(
        "anchor velocity tau=2x flagged",
        (|| {
            let v = velocity_dispersion(cfg, tau(2.0 * cfg.x())?);
            Ok(CheckOutcome::flag(
                "anchor velocity tau=2x flagged",
                !v.regular,
                "regular=false",
            ))
        })(),
    ));
    for &(gm, ratio, quoted) in &[(0.1, 10.0, 0.16), (0.01, 50.0, 0.11)] {
        let name = format!("anchor validity g/m={gm} tau={ratio}x");
        out.push(or_fail(
            &name,
            (|| {
                let c = ParticleConfig::new(gm, 1.0, 1.0)?;
                let v = validity_metric(&c, tau(ratio)?).relative_position_dispersion;
                Ok(CheckOutcome::at_most(
                    &name,
                    rel_err(v, quoted),
                    0.05,
                    format!("{v:.4} vs {quoted}"),
                ))
            })(),
        ));
    }
    out
}

/// 400-point scan of `tau/x` over `(0, 4]`: negative below `2 sqrt 2`,
/// positive above, singular only at 2. The window endpoints are checked for
/// exact zeros.
fn sign_scan(cfg: &ParticleConfig) -> CheckOutcome {
    let name = "sign scan 400 points";
    or_fail(
        name,
        (|| {
            let x = cfg.x();
            let edge = 2.0 * SQRT_2;
            let mut mismatches = 0usize;
            for k in 1..=400 {
                let r = 4.0 * k as f64 / 400.0;
                let v = velocity_dispersion(cfg, tau(r * x)?);
                let ok = if on_light_cone(x, r * x) {
                    !v.regular
                } else if r < edge {
                    v.regular && v.value < 0.0
                } else {
                    v.regular && v.value > 0.0
                };
                mismatches += usize::from(!ok);
            }
            let zero_scale = cfg.coupling_sq() * 1e-14;
            let at_zero = velocity_dispersion(cfg, tau(0.0)?).value;
            let at_edge = velocity_dispersion(cfg, tau(edge * x)?).value;
            mismatches += usize::from(at_zero != 0.0);
            mismatches += usize::from(at_edge.abs() > zero_scale);
            Ok(CheckOutcome::at_most(name, mismatches as f64, 0.0, "sign mismatches"))
        })(),
    )
}

fn scaling_checks(cfg: &ParticleConfig, p: f64) -> Vec<CheckOutcome> {
    let x = cfg.x();
    let mut worst_v = 0.0_f64;
    let mut worst_x = 0.0_f64;
    let outcome = (|| -> Result<()> {
        for &lambda in &SCALING_FACTORS {
            let scaled = cfg.with_x(lambda * x)?;
            for &r in &[0.3, 1.0, 1.9, 2.1, 3.0, 7.5] {
                let t = r * x;
                let v0 = velocity_under_test(cfg, t, 0.0)?;
                let v1 = velocity_under_test(&scaled, lambda * t, p)?;
                worst_v = worst_v.max(rel_err(v1, v0));
                let x0 = position_dispersion(cfg, tau(t)?).value;
                let x1 = position_dispersion(&scaled, tau(lambda * t)?).value;
                worst_x = worst_x.max(rel_err(x1, lambda * lambda * x0));
            }
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => vec![
            CheckOutcome::at_most("scaling velocity", worst_v, SCALING_TOL, "(x,tau) -> lambda (x,tau)"),
            CheckOutcome::at_most("scaling position", worst_x, SCALING_TOL, "lambda^2 law"),
        ],
        Err(e) => vec![CheckOutcome::failed("scaling", e.to_string())],
    }
}

fn velocity_oracle_check(cfg: &ParticleConfig, r: f64, p: f64, q: &QuadratureSpec) -> CheckOutcome {
    let name = format!("oracle velocity tau={r}x");
    or_fail(
        &name,
        (|| {
            let x = cfg.x();
            let fd = FiniteDifferenceSpec::for_distance(x)?;
            let o = velocity_dispersion_oracle(cfg, tau(r * x)?, &fd, q)?;
            let reference = velocity_under_test(cfg, r * x, p)?;
            Ok(CheckOutcome::at_most(
                &name,
                rel_err(o.dispersion.value, reference),
                VELOCITY_ORACLE_TOL,
                format!("oracle {:.9e}", o.dispersion.value),
            ))
        })(),
    )
}

fn position_oracle_check(cfg: &ParticleConfig, r: f64, q: &QuadratureSpec) -> CheckOutcome {
    let name = format!("oracle position tau={r}x");
    or_fail(
        &name,
        (|| {
            let x = cfg.x();
            let fd = FiniteDifferenceSpec::for_distance(x)?;
            let o = position_dispersion_oracle(cfg, tau(r * x)?, &fd, q)?;
            let reference = position_dispersion(cfg, tau(r * x)?).value;
            Ok(CheckOutcome::at_most(
                &name,
                rel_err(o.dispersion.value, reference),
                POSITION_ORACLE_TOL,
                format!("oracle {:.9e}", o.dispersion.value),
            ))
        })(),
    )
}

/// Observed second order: halving the step should divide the error by four.
fn richardson_check(cfg: &ParticleConfig, r: f64, p: f64, q: &QuadratureSpec) -> CheckOutcome {
    let name = format!("richardson tau={r}x");
    or_fail(
        &name,
        (|| {
            let x = cfg.x();
            let t = tau(r * x)?;
            let reference = velocity_under_test(cfg, r * x, p)?;
            let err = |h: f64| -> Result<f64> {
                let fd = FiniteDifferenceSpec::new(h)?;
                Ok((velocity_dispersion_oracle(cfg, t, &fd, q)?.dispersion.value - reference).abs())
            };
            let ratio = err(2.0 * RICHARDSON_STEP * x)? / err(RICHARDSON_STEP * x)?;
            let (lo, hi) = RICHARDSON_BAND;
            Ok(CheckOutcome {
                name: name.clone(),
                passed: (lo..=hi).contains(&ratio),
                measured: ratio,
                threshold: hi,
                detail: format!("error ratio in [{lo}, {hi}]"),
            })
        })(),
    )
}

fn numerics_checks() -> Vec<CheckOutcome> {
    let spec = QuadratureSpec::default();
    let c = 1.0 / 3.0;
    let cases: [(&str, Integrand, Vec<f64>, f64); 3] = [
        ("quad u", Box::new(|u| u), vec![], 0.5),
        ("quad ln(1/u)", Box::new(|u: f64| -u.ln()), vec![0.0], 1.0),
        (
            "quad ln|u-1/3|",
            Box::new(move |u: f64| (u - c).abs().ln()),
            vec![c],
            -1.0 + c * c.ln() + (1.0 - c) * (1.0 - c).ln(),
        ),
    ];
    let mut out: Vec<CheckOutcome> = cases
        .into_iter()
        .map(|(name, f, points, exact)| {
            or_fail(
                name,
                (|| {
                    let r = adaptive_quad(f, 0.0, 1.0, &spec.clone().with_singularities(points))?;
                    let bound = r.error.max(f64::EPSILON);
                    Ok(CheckOutcome::at_most(
                        name,
                        (r.value - exact).abs(),
                        bound,
                        "true error within reported bound",
                    ))
                })(),
            )
        })
        .collect();

    out.push(or_fail(
        "2F2 at 0",
        hyp2f2_1_1_3h_2(0.0, 1e-15).map(|r| CheckOutcome::flag("2F2 at 0", r.value == 1.0, "exactly 1")),
    ));
    out.push(or_fail(
        "2F2 at 1 regression",
        hyp2f2_1_1_3h_2(1.0, 1e-14).map(|r| {
            CheckOutcome::at_most(
                "2F2 at 1 regression",
                (r.value - HYP2F2_AT_ONE).abs(),
                1e-12,
                format!("{}", r.value),
            )
        }),
    ));
    out.push(or_fail(
        "pochhammer (3/2)_2",
        pochhammer(1.5, 2).map(|v| CheckOutcome::flag("pochhammer (3/2)_2", v == 3.75, "15/4")),
    ));
    out
}

fn smearing_checks(cfg: &ParticleConfig, q: &QuadratureSpec) -> Vec<CheckOutcome> {
    let x = cfg.x();
    let unit = match ParticleConfig::unit_coupling(x) {
        Ok(u) => u,
        Err(e) => return vec![CheckOutcome::failed("smearing", e.to_string())],
    };
    let depth = |sigma_over_x: f64| -> Result<(f64, f64)> {
        let s = SmearingConfig::with_sigma(sigma_over_x * x)?;
        let v = smeared_velocity_dispersion(&unit, tau(2.0 * x)?, &s, q)?.value;
        Ok((v, smeared_well_depth_asymptote(&unit, &s)))
    };

    let mut out = Vec::new();
    for &w in &SMEARING_WIDTHS {
        let name = format!("smeared finite sigma={w}x");
        out.push(or_fail(
            &name,
            depth(w).map(|(v, _)| CheckOutcome::flag(&name, v.is_finite(), format!("{v:.9e}"))),
        ));
    }

    let name = "smeared deviation monotone";
    out.push(or_fail(
        name,
        (|| {
            let devs = SMEARING_MONOTONE_WIDTHS
                .iter()
                .map(|&w| depth(w).map(|(v, a)| rel_err(v, a)))
                .collect::<Result<Vec<_>>>()?;
            let increases = devs.windows(2).filter(|d| d[1] >= d[0]).count();
            let listed: Vec<String> = devs.iter().map(|d| format!("{d:.4}")).collect();
            Ok(CheckOutcome::at_most(name, increases as f64, 0.0, listed.join(" ")))
        })(),
    ));

    let name = "smeared depth halving 0.02x->0.01x";
    out.push(or_fail(
        name,
        (|| {
            let (a, _) = depth(0.02)?;
            let (b, _) = depth(0.01)?;
            let expected = 0.25_f64.ln() / (4.0 * PI);
            Ok(CheckOutcome::at_most(
                name,
                rel_err(b - a, expected),
                WELL_DEPTH_TOL,
                format!("step {:.6} vs {:.6}", b - a, expected),
            ))
        })(),
    ));

    let name = "smeared quadrature vs 2F2 series";
    out.push(or_fail(
        name,
        (|| {
            let s = SmearingConfig::with_sigma(0.5 * x)?;
            let quad = smeared_velocity_dispersion(&unit, tau(x)?, &s, q)?.value;
            let series = smeared_velocity_dispersion_series(&unit, tau(x)?, 0.5 * x, 1e-12)?;
            Ok(CheckOutcome::at_most(
                name,
                (quad - series).abs(),
                1e-9,
                "tau=x sigma=x/2",
            ))
        })(),
    ));
    out
}

fn em_checks() -> Vec<CheckOutcome> {
    let name = "em late time";
    let r = (|| {
        let cfg = EmParticleConfig::new(1.0, 1.0, 1.0)?;
        let t = tau(1e4)?;
        let perp = em_velocity_dispersion_perp(&cfg, t).value;
        let par = em_velocity_dispersion_parallel(&cfg, t).value;
        let limit = 1.0 / (4.0 * PI * PI);
        Ok(vec![
            CheckOutcome::at_most(
                "em perp late limit",
                rel_err(perp, limit),
                1e-3,
                "vs e^2/(4 pi^2 m^2 x^2)",
            ),
            CheckOutcome::at_most("em parallel late ratio", (par / perp).abs(), 1e-3, "|par|/perp"),
        ])
    })();
    r.unwrap_or_else(|e: Error| vec![CheckOutcome::failed(name, e.to_string())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        let cfg = ParticleConfig::unit_coupling(1.0).unwrap();
        for c in anchor_checks(&cfg)
            .into_iter()
            .chain([sign_scan(&cfg)])
            .chain(scaling_checks(&cfg, 0.0))
            .chain(numerics_checks())
            .chain(em_checks())
        {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn perturbation_breaks_scaling_and_oracle() {
        let cfg = ParticleConfig::unit_coupling(1.0).unwrap();
        assert!(scaling_checks(&cfg, CANARY_PERTURBATION).iter().any(|c| !c.passed));
        let q = QuadratureSpec::default();
        assert!(!velocity_oracle_check(&cfg, 1.0, CANARY_PERTURBATION, &q).passed);
        assert!(velocity_oracle_check(&cfg, 1.0, 0.0, &q).passed);
    }

    #[test]
    fn singular_grid_point_fails_cleanly() {
        let cfg = ParticleConfig::unit_coupling(1.0).unwrap();
        let c = velocity_oracle_check(&cfg, 2.0, 0.0, &QuadratureSpec::default());
        assert!(!c.passed);
        assert!(c.detail.contains("stencil"));
    }
}
