use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::NeumaierSum;
use crate::error::{require_positive, Error, Result};

/// Tolerances and breakpoints for [`adaptive_quad`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Points where the integrand may have an integrable (at most
    /// logarithmic) singularity. Points outside the integration interval are
    /// ignored; points on an endpoint mark that endpoint as singular.
    pub singularities: Vec<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            singularities: Vec::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        require_positive("abs_tol", abs_tol)?;
        require_positive("rel_tol", rel_tol)?;
        if max_subdivisions == 0 {
            return Err(Error::Domain {
                name: "max_subdivisions",
                value: 0.0,
                requirement: "must be at least 1",
            });
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            singularities: Vec::new(),
        })
    }

    pub fn with_singularities<I: IntoIterator<Item = f64>>(mut self, points: I) -> Self {
        self.singularities = points.into_iter().collect();
        self
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
}

// 21-point Kronrod extension of the 10-point Gauss rule.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

struct RuleEstimate {
    value: f64,
    error: f64,
}

fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> RuleEstimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[10] * f_center;
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut f_lo = [0.0; 10];
    let mut f_hi = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        f_lo[j] = lo;
        f_hi[j] = hi;
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }

    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((f_lo[j] - mean).abs() + (f_hi[j] - mean).abs());
    }

    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();

    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }

    RuleEstimate { value, error }
}

/// Map from the unit interval onto one panel of the integration range.
///
/// Panels touching a declared singular point use `x = c ± L t^2`, which turns
/// a `ln|x - c|` endpoint into the bounded `t ln t`.
#[derive(Debug, Clone, Copy)]
enum PanelMap {
    Linear { start: f64, len: f64 },
    SingularStart { c: f64, len: f64 },
    SingularEnd { c: f64, len: f64 },
}

impl PanelMap {
    #[inline]
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            PanelMap::Linear { start, len } => len * f(start + len * t),
            PanelMap::SingularStart { c, len } => {
                let x = c + len * t * t;
                if x == c {
                    return 0.0;
                }
                2.0 * len * t * f(x)
            }
            PanelMap::SingularEnd { c, len } => {
                let x = c - len * t * t;
                if x == c {
                    return 0.0;
                }
                2.0 * len * t * f(x)
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    panel: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn build_panels(a: f64, b: f64, singularities: &[f64]) -> Vec<PanelMap> {
    let mut points: Vec<f64> = singularities
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p >= a && *p <= b)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let is_singular = |p: f64| points.contains(&p);

    let mut breaks = vec![a];
    breaks.extend(points.iter().copied().filter(|&p| p > a && p < b));
    breaks.push(b);

    let mut panels = Vec::with_capacity(2 * breaks.len());
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        match (is_singular(lo), is_singular(hi)) {
            (false, false) => panels.push(PanelMap::Linear {
                start: lo,
                len: hi - lo,
            }),
            (true, false) => panels.push(PanelMap::SingularStart { c: lo, len: hi - lo }),
            (false, true) => panels.push(PanelMap::SingularEnd { c: hi, len: hi - lo }),
            (true, true) => {
                let mid = 0.5 * (lo + hi);
                panels.push(PanelMap::SingularStart { c: lo, len: mid - lo });
                panels.push(PanelMap::SingularEnd { c: hi, len: hi - mid });
            }
        }
    }
    panels
}

/// Integrates `f` over `[a, b]`.
///
/// The interval is cut at every declared singularity; each resulting panel is
/// mapped onto `[0, 1]` (with a quadratic stretch at singular ends) and all
/// panels share one global error budget. The worst segment is bisected until
/// the summed Gauss–Kronrod error estimate drops below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive_quad<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain {
            name: "integration interval",
            value: b - a,
            requirement: "need finite a <= b",
        });
    }
    if a == b {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
            evaluations: 0,
        });
    }

    let panels = build_panels(a, b, &spec.singularities);
    let evaluate = |panel: usize, lo: f64, hi: f64| {
        let map = panels[panel];
        let g = |t: f64| map.eval(&f, t);
        let est = gauss_kronrod_21(&g, lo, hi);
        Segment {
            panel,
            lo,
            hi,
            value: est.value,
            error: est.error,
        }
    };

    let mut heap: BinaryHeap<Segment> = (0..panels.len()).map(|p| evaluate(p, 0.0, 1.0)).collect();
    let mut evaluations = 21 * panels.len();
    // segments too narrow to bisect further
    let mut frozen: Vec<Segment> = Vec::new();
    let mut subdivisions = 0;

    let totals = |heap: &BinaryHeap<Segment>, frozen: &[Segment]| {
        let mut value = NeumaierSum::new();
        let mut error = 0.0;
        for s in heap.iter().chain(frozen.iter()) {
            value.add(s.value);
            error += s.error;
        }
        (value.value(), error)
    };

    let (mut value, mut error) = totals(&heap, &frozen);
    loop {
        if !value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                value,
                error,
                subdivisions,
            });
        }
        if error <= spec.tolerance(value) {
            return Ok(QuadratureResult {
                value,
                error,
                subdivisions,
                evaluations,
            });
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi || worst.hi - worst.lo < 1e-15 {
            frozen.push(worst);
            continue;
        }
        if subdivisions >= spec.max_subdivisions {
            heap.push(worst);
            break;
        }
        let left = evaluate(worst.panel, worst.lo, mid);
        let right = evaluate(worst.panel, mid, worst.hi);
        evaluations += 42;
        subdivisions += 1;

        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);

        // resync the running totals now and then to stop drift
        if subdivisions % 64 == 0 {
            (value, error) = totals(&heap, &frozen);
        }
    }

    let (value, error) = totals(&heap, &frozen);
    if error <= spec.tolerance(value) && value.is_finite() {
        return Ok(QuadratureResult {
            value,
            error,
            subdivisions,
            evaluations,
        });
    }
    Err(Error::QuadratureNonConvergence {
        value,
        error,
        subdivisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::new(1e-12, 1e-12, 500).unwrap()
    }

    #[test]
    fn linear_integrand() {
        let r = adaptive_quad(|u| u, 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 0.5).abs() <= r.error.max(1e-15));
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn exact_on_high_degree_polynomials() {
        // Kronrod 21 integrates degree 31 exactly
        for degree in [5_i32, 13, 19, 25, 31] {
            let r = adaptive_quad(|u: f64| u.powi(degree), 0.0, 1.0, &spec()).unwrap();
            let exact = 1.0 / f64::from(degree + 1);
            assert!((r.value - exact).abs() < 4.0 * f64::EPSILON, "degree {degree}");
        }
    }

    #[test]
    fn endpoint_log_singularity() {
        let q = spec().with_singularities([0.0]);
        let r = adaptive_quad(|u: f64| -u.ln(), 0.0, 1.0, &q).unwrap();
        assert!((r.value - 1.0).abs() <= r.error);
        assert!(r.error <= 1e-12);
    }

    #[test]
    fn interior_log_singularity() {
        let c: f64 = 1.0 / 3.0;
        let exact = -1.0 + c * c.ln() + (1.0 - c) * (1.0 - c).ln();
        let q = spec().with_singularities([c]);
        let r = adaptive_quad(|u: f64| (u - c).abs().ln(), 0.0, 1.0, &q).unwrap();
        assert!((r.value - exact).abs() <= r.error, "{} vs {exact}", r.value);
    }

    #[test]
    fn singularities_outside_interval_are_ignored() {
        let q = spec().with_singularities([-1.0, 2.0, f64::NAN]);
        let r = adaptive_quad(|u: f64| u * u, 0.0, 1.0, &q).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn both_ends_singular() {
        // int_0^1 ln u + ln(1-u) du = -2
        let q = spec().with_singularities([0.0, 1.0]);
        let r = adaptive_quad(|u: f64| u.ln() + (1.0 - u).ln(), 0.0, 1.0, &q).unwrap();
        assert!((r.value + 2.0).abs() <= r.error.max(1e-14));
    }

    #[test]
    fn empty_interval() {
        let r = adaptive_quad(|_| panic!("must not evaluate"), 2.0, 2.0, &spec()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn reversed_interval_is_rejected() {
        assert!(matches!(
            adaptive_quad(|u| u, 1.0, 0.0, &spec()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn nonconvergence_carries_best_estimate() {
        let q = QuadratureSpec::new(1e-14, 1e-14, 3).unwrap();
        // undeclared interior singularity with too small a budget
        match adaptive_quad(|u: f64| (u - 0.3).abs().ln(), 0.0, 1.0, &q) {
            Err(Error::QuadratureNonConvergence {
                value,
                error,
                subdivisions,
            }) => {
                assert!(value.is_finite());
                assert!(error > 1e-14);
                assert_eq!(subdivisions, 3);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 1e-9, 10).is_err());
        assert!(QuadratureSpec::new(1e-9, -1.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-9, 1e-9, 0).is_err());
    }
}
