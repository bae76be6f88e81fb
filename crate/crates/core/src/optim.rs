//! Small dense optimizers: BFGS with backtracking line search, Brent's
//! minimizer on an interval and a bracketed bisection root finder.

/// Stopping rules for [`bfgs_minimize`].
#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Relative change in the objective treated as stalled.
    pub rel_tol: f64,
    /// Infinity-norm of the gradient treated as stationary.
    pub grad_tol: f64,
    /// Largest step (infinity norm) taken in one iteration.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            rel_tol: 1e-10,
            grad_tol: 1e-8,
            max_step: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BfgsResult<const N: usize> {
    pub x: [f64; N],
    pub value: f64,
    pub grad: [f64; N],
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Final inverse-Hessian approximation, reusable as a warm start.
    pub inv_hessian: [[f64; N]; N],
}

fn inf_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// Minimizes `f` from `x0`. The objective returns `None` (or a non-finite
/// value) outside its domain; the line search then backtracks.
pub fn bfgs_minimize<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    inv_hessian: Option<[[f64; N]; N]>,
    opts: BfgsOptions,
) -> Option<BfgsResult<N>>
where
    F: FnMut(&[f64; N]) -> Option<(f64, [f64; N])>,
{
    let mut evals = 1;
    let (mut fx, mut g) = f(&x0).filter(|(v, _)| v.is_finite())?;
    let mut x = x0;
    let mut h = inv_hessian.unwrap_or_else(identity::<N>);
    let mut fresh_h = inv_hessian.is_none();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if inf_norm(&g) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = [0.0; N];
        for i in 0..N {
            dir[i] = -(0..N).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            // Lost descent; restart from steepest descent.
            h = identity();
            fresh_h = true;
            for i in 0..N {
                dir[i] = -g[i];
            }
            slope = dot(&dir, &g);
        }
        let scale = inf_norm(&dir);
        let mut step = if scale > opts.max_step { opts.max_step / scale } else { 1.0 };

        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x;
            for i in 0..N {
                trial[i] += step * dir[i];
            }
            evals += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            converged = inf_norm(&g) <= 100.0 * opts.grad_tol;
            break;
        };

        let mut s = [0.0; N];
        let mut y = [0.0; N];
        for i in 0..N {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh_h {
                // Scale the initial approximation to the observed curvature.
                let gamma = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j { gamma } else { 0.0 };
                    }
                }
                fresh_h = false;
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; N];
            for i in 0..N {
                hy[i] = (0..N).map(|j| h[i][j] * y[j]).sum();
            }
            let yhy = dot(&y, &hy);
            for i in 0..N {
                for j in 0..N {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }

        let change = (fx - fn_).abs();
        x = xn;
        fx = fn_;
        g = gn;
        if change <= opts.rel_tol * (1.0 + fx.abs()) && inf_norm(&g) <= 100.0 * opts.grad_tol {
            converged = true;
            break;
        }
    }
    if !converged && inf_norm(&g) <= opts.grad_tol {
        converged = true;
    }
    Some(BfgsResult {
        x,
        value: fx,
        grad: g,
        iterations,
        evaluations: evals,
        converged,
        inv_hessian: h,
    })
}

/// Brent's method for the minimum of `f` on `[a, b]`; returns `(x, f(x))`.
pub fn brent_minimize<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if !(p.abs() >= (0.5 * q * etemp).abs() || p <= q * (a - x) || p >= q * (b - x)) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Root of a function that changes sign on `[lo, hi]`, by bisection.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return mid;
        }
        let fm = f(mid);
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
