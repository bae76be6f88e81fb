#![allow(dead_code)]

use fimix::families::{score_vector, FamilyKind, IncubationFamily};
use fimix::quad::{integrate_log_axis, QuadOptions};

/// One-sample Kolmogorov–Smirnov distance against `cdf`.
pub fn ks_one(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((((i + 1) as f64) / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Integral of `density` over `(0, ∞)` on the log axis, covering all but
/// ~1e-16 of the mass of `family` at each end.
pub fn total_mass(family: &IncubationFamily, density: impl Fn(f64) -> f64) -> f64 {
    let lo = family.lower_truncation(1e-17).min(1e-17 * family.mean());
    let hi = family.upper_truncation(1e-18) * 4.0;
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_segments: 8000,
    };
    integrate_log_axis(density, lo, hi, opts).unwrap()
}

/// Largest relative discrepancy between analytic null scores and central
/// differences (step `1e-5`) of the log densities, over `grid` points.
pub fn score_fd_error(kind: FamilyKind, lambda0: f64, grid: &[f64]) -> f64 {
    let h = 1e-5;
    let a0 = kind.c0_shape().unwrap();
    let lf = |l: f64, a: f64, t: f64| IncubationFamily::new(kind, l, a).unwrap().ln_pdf(t).unwrap();
    let lg = |a: f64, t: f64| IncubationFamily::new(kind, lambda0, a).unwrap().ln_forward_pdf(t).unwrap();
    let mut worst = 0.0f64;
    for &t in grid {
        let s = score_vector(kind, lambda0, t).unwrap();
        let fd = [
            (lf(lambda0 + h, a0, t) - lf(lambda0 - h, a0, t)) / (2.0 * h),
            (lf(lambda0, a0 + h, t) - lf(lambda0, a0 - h, t)) / (2.0 * h),
            (lg(a0 + h, t) - lg(a0 - h, t)) / (2.0 * h),
        ];
        for (a, b) in [s.x, s.y1, s.y2].into_iter().zip(fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-3));
        }
    }
    worst
}

/// Fifty log-spaced points spanning the bulk of an exponential(λ₀) law.
pub fn score_grid(lambda0: f64) -> Vec<f64> {
    (0..50).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 49.0) / lambda0).collect()
}
