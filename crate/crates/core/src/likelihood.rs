//! Log-likelihood of the duration mixture and maximum-likelihood fits under
//! the full model `(λ, α, p)` and the exponential null.
//!
//! The full fit profiles the likelihood over a fixed grid of mixing weights
//! `p ∈ {0, 1/K, …, 1}`. At each grid point `(ln λ, ln α)` is maximized by
//! BFGS along two continuation sweeps: one walks down from `p = 1` starting
//! at the pure-incubation moment estimate (and the null fit, when the family
//! has one), the other walks up from `p = 0` starting at the pure-forward-time
//! moment estimate. The better sweep wins at each grid point. The best grid
//! point is then refined by Brent's method on the profile over its two
//! neighbouring cells.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::families::{FamilyKind, IncubationFamily, Kernel, MixtureModel};
use crate::optim::{bfgs_minimize, bisect, brent_minimize, BfgsOptions};

/// How the duration times were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Raw,
    Jitter,
    Midpoint,
}

/// Positive duration times with their provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationSample {
    times: Vec<f64>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl DurationSample {
    pub fn new(times: Vec<f64>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(**t > 0.0 && t.is_finite())) {
            return Err(domain(format!("duration {i} is not a positive finite time: {t}")));
        }
        Ok(DurationSample { times, provenance, seed })
    }

    pub fn raw(times: Vec<f64>) -> Result<Self> {
        Self::new(times, Provenance::Raw, None)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn mean(&self) -> f64 {
        self.times.iter().sum::<f64>() / self.len() as f64
    }
}

/// `ℓ_n(λ, α, p) = Σ ln h(t_i; λ, α, p)`.
///
/// A zero-density observation is reported as an error rather than folded
/// into a `-∞` sum.
pub fn loglik(model: &MixtureModel, sample: &DurationSample) -> Result<f64> {
    let kernel = model.family.kernel();
    let mut total = 0.0;
    for (index, &t) in sample.times().iter().enumerate() {
        let e = kernel.eval(t, t.ln(), false);
        let term = crate::families::mix_ln(model.p, e.lf, e.lg);
        if term == f64::NEG_INFINITY || term.is_nan() {
            return Err(Error::DegenerateLikelihood { index, time: t });
        }
        total += term;
    }
    Ok(total)
}

/// Gradient of `ℓ_n` with respect to `(ln λ, ln α, p)`.
pub fn loglik_gradient(model: &MixtureModel, sample: &DurationSample) -> [f64; 3] {
    let data = Prepared::new(sample);
    let fam = &model.family;
    data.eval(fam.kind(), fam.rate(), fam.shape(), model.p, true).1
}

/// One point of the profile likelihood over `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub p: f64,
    pub loglik: f64,
    pub rate: f64,
    pub shape: f64,
    pub converged: bool,
}

/// Grid evaluations behind a full fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrace {
    pub grid: Vec<ProfilePoint>,
    /// Grid weights whose profile value tied the maximum; the largest wins.
    pub tied: Vec<f64>,
    /// Inner optimizations that failed to converge, as `(p, sweep)` pairs.
    pub failures: Vec<(f64, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: FamilyKind,
    pub rate: f64,
    pub shape: f64,
    pub p: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub profile_trace: Option<ProfileTrace>,
}

impl FitResult {
    pub fn model(&self) -> Result<MixtureModel> {
        MixtureModel::from_params(self.family, self.rate, self.shape, self.p)
    }
}

/// Settings for [`fit_full`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Number of grid cells `K`; the grid has `K + 1` points.
    pub grid_size: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Absolute tolerance on profile values treated as ties.
    pub tie_tol: f64,
    pub polish: bool,
    pub keep_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grid_size: 50,
            max_iter: 200,
            rel_tol: 1e-10,
            tie_tol: 1e-9,
            polish: true,
            keep_trace: true,
        }
    }
}

/// Sample with logs precomputed.
struct Prepared<'a> {
    times: &'a [f64],
    ln_times: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(sample: &'a DurationSample) -> Self {
        Prepared {
            times: sample.times(),
            ln_times: sample.times().iter().map(|t| t.ln()).collect(),
        }
    }

    /// `ℓ_n` and its gradient in `(ln λ, ln α, p)`.
    fn eval(&self, kind: FamilyKind, rate: f64, shape: f64, p: f64, grad: bool) -> (f64, [f64; 3]) {
        let kernel = Kernel::new(kind, rate, shape);
        let q = 1.0 - p;
        let mut ll = 0.0;
        let mut g = [0.0; 3];
        for (&t, &ln_t) in self.times.iter().zip(&self.ln_times) {
            let e = kernel.eval(t, ln_t, grad);
            let d = e.lf - e.lg;
            // h / g and f / h without overflow
            let (ln_h, w, f_minus_g_over_h) = if d < 30.0 {
                let ed = d.exp();
                let ratio = q + p * ed;
                (e.lg + ratio.ln(), p * ed / ratio, (ed - 1.0) / ratio)
            } else {
                let emd = (-d).exp();
                let ratio = p + q * emd;
                (e.lf + ratio.ln(), p / ratio, (1.0 - emd) / ratio)
            };
            ll += ln_h;
            if grad {
                g[0] += w * e.dlf[0] + (1.0 - w) * e.dlg[0];
                g[1] += w * e.dlf[1] + (1.0 - w) * e.dlg[1];
                g[2] += f_minus_g_over_h;
            }
        }
        (ll, g)
    }
}

// Box on the log parameters; outside it densities overflow.
const LN_RATE_BOUND: f64 = 40.0;
const LN_SHAPE_MIN: f64 = -6.9; // α ≈ 1e-3
const LN_SHAPE_MAX: f64 = 6.9; // α ≈ 1e3

#[derive(Clone, Copy, Debug)]
struct Inner {
    u: f64,
    v: f64,
    loglik: f64,
    converged: bool,
    iterations: usize,
    inv_hessian: Option<[[f64; 2]; 2]>,
}

/// Maximizes the profile at fixed `p` from `(u, v) = (ln λ, ln α)`.
fn maximize_at(data: &Prepared<'_>, kind: FamilyKind, p: f64, start: (f64, f64), warm: Option<[[f64; 2]; 2]>, opts: &FitOptions) -> Option<Inner> {
    let n = data.times.len() as f64;
    let bfgs = BfgsOptions {
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        grad_tol: 1e-7 * n,
        max_step: 2.0,
    };
    let r = bfgs_minimize(
        |x: &[f64; 2]| {
            if x[0].abs() > LN_RATE_BOUND || !(LN_SHAPE_MIN..=LN_SHAPE_MAX).contains(&x[1]) {
                return None;
            }
            let (ll, g) = data.eval(kind, x[0].exp(), x[1].exp(), p, true);
            (ll.is_finite() && g[0].is_finite() && g[1].is_finite()).then_some((-ll, [-g[0], -g[1]]))
        },
        [start.0, start.1],
        warm,
        bfgs,
    )?;
    Some(Inner {
        u: r.x[0],
        v: r.x[1],
        loglik: -r.value,
        converged: r.converged,
        iterations: r.iterations,
        inv_hessian: Some(r.inv_hessian),
    })
}

/// Moment starting values `(ln λ, ln α)` for the pure-incubation model
/// (`forward = false`) or the pure-forward-time model (`forward = true`).
fn moment_start(kind: FamilyKind, sample: &DurationSample, forward: bool) -> (f64, f64) {
    let n = sample.len() as f64;
    let m1 = sample.mean();
    let m2 = sample.times().iter().map(|t| t * t).sum::<f64>() / n;
    let target = (m2 / (m1 * m1)).max(1.0 + 1e-6).ln();
    let m = |a: f64, k: f64| kind.ln_unit_moment(a, k);
    // ln(E[T²] / E[T]²) as a function of ln α, at λ = 1
    let ln_ratio = |v: f64| {
        let a = v.exp();
        if forward {
            (4.0f64 / 3.0).ln() + m(a, 1.0) + m(a, 3.0) - 2.0 * m(a, 2.0)
        } else {
            m(a, 2.0) - 2.0 * m(a, 1.0)
        }
    };
    let (lo, hi) = ((0.05f64).ln(), (50.0f64).ln());
    let (flo, fhi) = (ln_ratio(lo) - target, ln_ratio(hi) - target);
    let v = if flo.signum() != fhi.signum() {
        bisect(|v| ln_ratio(v) - target, lo, hi, 1e-10)
    } else if flo.abs() < fhi.abs() {
        lo
    } else {
        hi
    };
    let a = v.exp();
    // λ matches the first moment: E[T] = c(α) / λ.
    let ln_c = if forward { m(a, 2.0) - 2f64.ln() - m(a, 1.0) } else { m(a, 1.0) };
    (ln_c - m1.ln(), v)
}

/// Null fit: the exponential model `α = α₀`, `p = 1`, whose MLE is
/// `λ̂₀ = 1 / mean(t)`.
pub fn fit_null(sample: &DurationSample, kind: FamilyKind) -> Result<FitResult> {
    let alpha0 = kind.require_c0()?;
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = sample.len() as f64;
    let rate = 1.0 / sample.mean();
    Ok(FitResult {
        family: kind,
        rate,
        shape: alpha0,
        p: 1.0,
        loglik: n * (rate.ln() - 1.0),
        converged: true,
        iterations: 0,
        profile_trace: None,
    })
}

/// Starting point `(ln λ, ln α)` with an optional inverse-Hessian seed.
type Start = ((f64, f64), Option<[[f64; 2]; 2]>);

/// Full maximum-likelihood fit of `(λ, α, p)`.
pub fn fit_full(sample: &DurationSample, kind: FamilyKind, opts: &FitOptions) -> Result<FitResult> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if opts.grid_size == 0 {
        return Err(domain("grid size must be at least 1"));
    }
    let data = Prepared::new(sample);
    let k = opts.grid_size;
    let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut iterations = 0;
    let mut failures = Vec::new();

    let f_start = moment_start(kind, sample, false);
    let g_start = moment_start(kind, sample, true);
    let null_start = fit_null(sample, kind).ok().map(|r| (r.rate.ln(), r.shape.ln()));

    // Downward sweep from p = 1.
    let mut down: Vec<Option<Inner>> = vec![None; k + 1];
    let mut prev: Option<Inner> = None;
    for i in (0..=k).rev() {
        let p = grid[i];
        let mut best: Option<Inner> = None;
        let mut starts: Vec<Start> = Vec::new();
        match prev {
            Some(pr) => starts.push(((pr.u, pr.v), pr.inv_hessian)),
            None => {
                starts.push((f_start, None));
                if let Some(s) = null_start {
                    starts.push((s, None));
                }
            }
        }
        for (s, warm) in starts {
            if let Some(r) = maximize_at(&data, kind, p, s, warm, opts) {
                iterations += r.iterations;
                if best.is_none_or(|b| r.loglik > b.loglik) {
                    best = Some(r);
                }
            }
        }
        if best.is_none_or(|b| !b.converged) {
            failures.push((p, "down".to_string()));
        }
        if best.is_some() {
            prev = best;
        }
        down[i] = best;
    }

    // Upward sweep from p = 0.
    let mut up: Vec<Option<Inner>> = vec![None; k + 1];
    let mut prev: Option<Inner> = None;
    for i in 0..=k {
        let p = grid[i];
        let (s, warm) = match prev {
            Some(pr) => ((pr.u, pr.v), pr.inv_hessian),
            None => (g_start, None),
        };
        let r = maximize_at(&data, kind, p, s, warm, opts);
        if let Some(r) = r {
            iterations += r.iterations;
            prev = Some(r);
        }
        if r.is_none_or(|b| !b.converged) {
            failures.push((p, "up".to_string()));
        }
        up[i] = r;
    }

    let profile: Vec<Option<Inner>> = down
        .into_iter()
        .zip(up)
        .map(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => Some(if b.loglik > a.loglik { b } else { a }),
            (a, b) => a.or(b),
        })
        .collect();

    let max_ll = profile
        .iter()
        .flatten()
        .map(|r| r.loglik)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_ll.is_finite() {
        return Err(Error::Convergence(format!(
            "every profile optimization failed ({} failures over {} grid points)",
            failures.len(),
            k + 1
        )));
    }
    let tied: Vec<usize> = (0..=k)
        .filter(|&i| profile[i].is_some_and(|r| r.loglik >= max_ll - opts.tie_tol))
        .collect();
    let best_i = *tied.last().expect("max is attained");
    let mut best_p = grid[best_i];
    let mut best = profile[best_i].expect("attained");

    if opts.polish && k > 0 {
        let lo = grid[best_i.saturating_sub(1)];
        let hi = grid[(best_i + 1).min(k)];
        let mut anchor = best;
        let mut evals: Vec<(f64, Inner)> = Vec::new();
        brent_minimize(
            |p| match maximize_at(&data, kind, p, (anchor.u, anchor.v), anchor.inv_hessian, opts) {
                Some(r) => {
                    iterations += r.iterations;
                    if r.loglik > anchor.loglik {
                        anchor = r;
                    }
                    evals.push((p, r));
                    -r.loglik
                }
                None => f64::INFINITY,
            },
            lo,
            hi,
            1e-7,
            60,
        );
        for (p, r) in evals {
            if r.loglik > best.loglik + opts.tie_tol || (r.loglik >= best.loglik && r.converged && !best.converged) {
                best = r;
                best_p = p;
            }
        }
    }

    let trace = opts.keep_trace.then(|| ProfileTrace {
        grid: grid
            .iter()
            .zip(&profile)
            .map(|(&p, r)| match r {
                Some(r) => ProfilePoint {
                    p,
                    loglik: r.loglik,
                    rate: r.u.exp(),
                    shape: r.v.exp(),
                    converged: r.converged,
                },
                None => ProfilePoint {
                    p,
                    loglik: f64::NEG_INFINITY,
                    rate: f64::NAN,
                    shape: f64::NAN,
                    converged: false,
                },
            })
            .collect(),
        tied: tied.iter().map(|&i| grid[i]).collect(),
        failures,
    });

    let fam = IncubationFamily::new(kind, best.u.exp(), best.v.exp())?;
    Ok(FitResult {
        family: kind,
        rate: fam.rate(),
        shape: fam.shape(),
        p: best_p,
        loglik: best.loglik,
        converged: best.converged,
        iterations,
        profile_trace: trace,
    })
}
