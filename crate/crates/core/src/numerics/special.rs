use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used by callers that do not pick one.
pub const HYP2F2_DEFAULT_TOL: f64 = 1e-12;

const MAX_SERIES_TERMS: usize = 10_000;

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Rising factorial `(a)_n = a (a+1) ... (a+n-1)`, with `(a)_0 = 1`.
pub fn pochhammer(a: f64, n: u32) -> Result<f64> {
    let mut product = 1.0;
    for k in 0..n {
        product *= a + f64::from(k);
    }
    if product.is_finite() {
        Ok(product)
    } else {
        Err(Error::Overflow("pochhammer symbol"))
    }
}

/// Outcome of a truncated series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
    /// Truncation tail bound plus accumulated rounding bound.
    pub error_estimate: f64,
}

/// Terms `c_n z^n` of `2F2(1,1;3/2,2;z)`, generated by the ratio
/// `c_{n+1}/c_n = (n+1) / ((n+3/2)(n+2))`.
#[derive(Debug, Clone)]
pub(crate) struct Hyp2f2Terms {
    z: f64,
    n: usize,
    term: f64,
}

impl Hyp2f2Terms {
    pub(crate) fn new(z: f64) -> Self {
        Self { z, n: 0, term: 1.0 }
    }

    fn ratio(n: usize) -> f64 {
        let n = n as f64;
        (n + 1.0) / ((n + 1.5) * (n + 2.0))
    }
}

impl Iterator for Hyp2f2Terms {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let current = self.term;
        self.term *= self.z * Self::ratio(self.n);
        self.n += 1;
        Some(current)
    }
}

/// `2F2(1,1;3/2,2;z)` by direct summation of its Maclaurin series.
///
/// The function is entire, but the series suffers cancellation for large
/// negative `z`: the rounding bound grows like the largest term, roughly
/// `e^{|z|}`. In double precision results are reliable for
/// `-20 <= z <= 50`; outside that envelope the rounding bound will exceed any
/// small `tol` and a [`Error::SeriesNonConvergence`] is returned carrying the
/// best partial sum.
pub fn hyp2f2_1_1_3h_2(z: f64, tol: f64) -> Result<SeriesResult> {
    crate::error::require_positive("tol", tol)?;
    crate::error::require_finite("z", z)?;

    let eps = f64::EPSILON;
    let mut acc = NeumaierSum::new();
    // sum over k of (5k + 1)|t_k|: relative error of the k-th term from the recurrence
    let mut weighted_abs = 0.0;
    let mut terms = Hyp2f2Terms::new(z);

    for n in 0..MAX_SERIES_TERMS {
        let t = terms.next().expect("infinite iterator");
        acc.add(t);
        weighted_abs += (5.0 * n as f64 + 1.0) * t.abs();

        let value = acc.value();
        if !value.is_finite() || !weighted_abs.is_finite() {
            return Err(Error::Overflow("2F2 series"));
        }
        let rounding = eps * (2.0 * value.abs() + weighted_abs);

        let next_ratio = z.abs() * Hyp2f2Terms::ratio(n + 1);
        if next_ratio >= 1.0 {
            continue;
        }
        let tail = terms.term.abs() / (1.0 - next_ratio);
        let error_estimate = tail + rounding;
        let result = SeriesResult {
            value,
            terms_used: n + 1,
            converged: error_estimate <= tol,
            error_estimate,
        };
        if result.converged {
            return Ok(result);
        }
        // rounding dominates and more terms cannot help
        if tail < 1e-3 * rounding {
            return Err(Error::SeriesNonConvergence(result));
        }
    }

    let value = acc.value();
    Err(Error::SeriesNonConvergence(SeriesResult {
        value,
        terms_used: MAX_SERIES_TERMS,
        converged: false,
        error_estimate: f64::INFINITY,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pochhammer_small_cases() {
        assert_eq!(pochhammer(-7.25, 0).unwrap(), 1.0);
        assert_eq!(pochhammer(1.5, 2).unwrap(), 15.0 / 4.0);
        let mut factorial = 1.0;
        for n in 0..20u32 {
            assert_eq!(pochhammer(1.0, n).unwrap(), factorial);
            factorial *= f64::from(n + 1);
        }
    }

    #[test]
    fn pochhammer_recurrence() {
        for &a in &[0.5, 1.5, 2.0, -3.5, 7.125] {
            for n in 0..30u32 {
                let lhs = pochhammer(a, n + 1).unwrap();
                let rhs = pochhammer(a, n).unwrap() * (a + f64::from(n));
                assert!((lhs - rhs).abs() <= f64::EPSILON * lhs.abs(), "a={a} n={n}");
            }
        }
    }

    #[test]
    fn pochhammer_overflow() {
        assert_eq!(pochhammer(10.0, 400), Err(Error::Overflow("pochhammer symbol")));
    }

    #[test]
    fn hyp2f2_at_origin_is_one() {
        let r = hyp2f2_1_1_3h_2(0.0, 1e-15).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(r.converged);
    }

    #[test]
    fn hyp2f2_leading_coefficient() {
        for &z in &[1e-2, -1e-2, 1e-3, -1e-3] {
            let r = hyp2f2_1_1_3h_2(z, 1e-15).unwrap();
            let remainder = r.value - 1.0 - z / 3.0;
            // next coefficient is (1*2)/((3/2)(5/2)(2)(3)) * 1/2! ... bounded by z^2/10
            assert!(remainder.abs() <= z * z * 0.1, "z={z} remainder={remainder}");
        }
    }

    #[test]
    fn hyp2f2_partial_sums_increase_for_positive_z() {
        for &z in &[0.1, 1.0, 5.0, 20.0, 50.0] {
            let mut partial = 0.0;
            for t in Hyp2f2Terms::new(z).take(200) {
                let next = partial + t;
                assert!(next >= partial);
                partial = next;
            }
        }
    }

    #[test]
    fn hyp2f2_rejects_bad_tol() {
        assert!(matches!(hyp2f2_1_1_3h_2(1.0, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn hyp2f2_large_negative_argument_reports_nonconvergence() {
        match hyp2f2_1_1_3h_2(-200.0, 1e-12) {
            Err(Error::SeriesNonConvergence(r)) => assert!(!r.converged),
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn neumaier_recovers_cancelled_bits() {
        let s: NeumaierSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
