//! Special functions used by the families: incomplete gamma in log form,
//! the scaled exponential integral, and a log-survival function for the
//! standard normal that stays finite far into the tail.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_ITERS: usize = 100_000;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Series for `P(a, x)` divided by its prefactor; valid for `x < a + 1`.
fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITERS {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz continued fraction for `Q(a, x)` divided by its prefactor;
/// valid for `x >= a + 1`.
fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITERS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `ln P(a, x)` and `ln Q(a, x)` of the regularized incomplete gamma function.
pub fn ln_gamma_pq(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let ln_pref = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let ln_p = ln_pref + (gamma_series(a, x)).ln();
        (ln_p, ln_1m_exp(ln_p))
    } else {
        let ln_q = ln_pref + gamma_cont_frac(a, x).ln();
        (ln_1m_exp(ln_q), ln_q)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    ln_gamma_pq(a, x).0.exp()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    ln_gamma_pq(a, x).1.exp()
}

/// `ln(1 - exp(v))` for `v <= 0`.
pub fn ln_1m_exp(v: f64) -> f64 {
    if v > -std::f64::consts::LN_2 {
        (-v.exp_m1()).ln()
    } else {
        (-v.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `e^x E1(x)` for `x > 0`, where `E1` is the exponential integral.
pub fn scaled_exp_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k k!)
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let add = term / kf;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        let mut b = x + 1.0;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITERS {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }
}

/// Standard normal log-density.
pub fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln(1 - Φ(z))`, accurate for large positive `z`.
pub fn ln_norm_sf(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)).ln()
    } else {
        let z2 = 1.0 / (z * z);
        let series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
        ln_norm_pdf(z) - z.ln() + series.ln()
    }
}

/// Inverse Mills ratio `φ(z) / (1 - Φ(z))`.
pub fn inv_mills(z: f64) -> f64 {
    (ln_norm_pdf(z) - ln_norm_sf(z)).exp()
}
