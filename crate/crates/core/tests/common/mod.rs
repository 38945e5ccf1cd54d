#![allow(dead_code)]

use std::f64::consts::PI;

pub fn rel(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Tensor-product Gauss–Legendre over `[0, a] x [0, b]`.
pub fn tensor_gl<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let mut total = 0.0;
    for &(u, wu) in &rule {
        for &(v, wv) in &rule {
            total += wu * wv * f(0.5 * a * (u + 1.0), 0.5 * b * (v + 1.0));
        }
    }
    0.25 * a * b * total
}
