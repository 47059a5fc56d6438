//! Quadrature oracles for Gaussian quantities.

use lbs_core::diffnum::{gaussian_log_density, DiagonalGaussian};

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn g1(mean: f64, std: f64) -> DiagonalGaussian {
    DiagonalGaussian::new(vec![mean], vec![std]).unwrap()
}

pub fn kl_by_quadrature(q: &DiagonalGaussian, p: &DiagonalGaussian) -> f64 {
    let (mq, sq) = (q.mean()[0], q.std()[0]);
    let lo = mq - 14.0 * sq;
    let hi = mq + 14.0 * sq;
    simpson(
        |x| {
            let lq = gaussian_log_density(q, &[x]).unwrap();
            let lp = gaussian_log_density(p, &[x]).unwrap();
            lq.exp() * (lq - lp)
        },
        lo,
        hi,
        20_000,
    )
}

/// 1-D (q, p) pairs as ((mean, std), (mean, std)).
pub const KL_CASES: [((f64, f64), (f64, f64)); 6] = [
    ((0.0, 1.0), (0.0, 1.0)),
    ((1.0, 1.0), (0.0, 1.0)),
    ((0.0, 2.0), (0.0, 1.0)),
    ((-0.7, 0.3), (0.4, 1.7)),
    ((2.5, 0.05), (2.4, 0.2)),
    ((-3.0, 4.0), (1.0, 2.5)),
];
