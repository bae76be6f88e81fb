//! Adaptive Gauss–Kronrod quadrature and fixed Gauss–Legendre panels.

use crate::error::{Error, Result};

// 15-point Kronrod nodes (non-negative half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 10-point Gauss–Legendre nodes (non-negative half) and weights.
const GL10_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = fc * WK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * h,
        err: ((kronrod - gauss) * h).abs(),
    }
}

/// Settings for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_segments: 4000,
        }
    }
}

/// Globally adaptive G7–K15 quadrature of `f` over `[lo, hi]`.
///
/// The segment with the largest error estimate is bisected until the summed
/// error falls below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let mut segments = vec![gk15(&mut f, lo, hi)];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.err).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature { lo, hi, err: f64::NAN });
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= opts.max_segments {
            return Err(Error::Quadrature { lo, hi, err });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .expect("non-empty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature { lo, hi, err });
        }
        segments.push(gk15(&mut f, seg.lo, mid));
        segments.push(gk15(&mut f, mid, seg.hi));
    }
}

/// Integrates `f(t)` over `[t_lo, t_hi]` (both positive) on the axis
/// `x = ln t`, which removes integrable power singularities at the origin
/// and compresses long tails.
pub fn integrate_log_axis<F: FnMut(f64) -> f64>(mut f: F, t_lo: f64, t_hi: f64, opts: QuadOptions) -> Result<f64> {
    debug_assert!(t_lo > 0.0 && t_hi >= t_lo);
    integrate(
        |x| {
            let t = x.exp();
            f(t) * t
        },
        t_lo.ln(),
        t_hi.ln(),
        opts,
    )
}

/// Composite 10-point Gauss–Legendre rule with `panels` equal panels.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let a = lo + width * k as f64;
        let c = a + 0.5 * width;
        let h = 0.5 * width;
        let mut s = 0.0;
        for j in 0..5 {
            let dx = h * GL10_X[j];
            s += GL10_W[j] * (f(c - dx) + f(c + dx));
        }
        total += s * h;
    }
    total
}
