//! Incubation-period families, the induced forward-time density and the
//! two-component mixture.
//!
//! Every family is indexed by a rate-like scale `λ` (units of 1/time) and a
//! dimensionless shape `α`:
//!
//! | family    | incubation density `f(t; λ, α)`                 | mean `μ(λ, α)`       |
//! |-----------|-------------------------------------------------|----------------------|
//! | Weibull   | `λα(λt)^{α-1} exp{-(λt)^α}`                      | `Γ(1 + 1/α) / λ`     |
//! | Gamma     | `λ^α t^{α-1} e^{-λt} / Γ(α)`                     | `α / λ`              |
//! | Lognormal | `ln T ~ N(-ln λ, α²)`                            | `exp(-ln λ + α²/2)`  |
//!
//! **Lognormal convention.** The lognormal location is `-ln λ` and its scale
//! is `α`, so `λ` stays rate-like (doubling `λ` halves every quantile) and
//! `α` plays the role of the dispersion.
//!
//! The forward time has density `g(t) = (1 - F(t)) / μ` and the observed
//! duration has density `h(t) = p f(t) + (1 - p) g(t)`. For Weibull and Gamma
//! at `α = 1` both components are the same exponential density, so `p`
//! drops out of `h`.
//!
//! Log densities are the primitive; plain densities exponentiate them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, LogNormal, Weibull as WeibullDist};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{
    digamma, gamma_p, ln_gamma, ln_gamma_pq, ln_norm_pdf, ln_norm_sf, norm_cdf, scaled_exp_e1, EULER_GAMMA,
};

/// Parametric family of the incubation period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Weibull,
    Gamma,
    Lognormal,
}

impl FamilyKind {
    /// Shape at which `f = g` (the exponential point), if the family has one.
    pub fn c0_shape(self) -> Option<f64> {
        match self {
            FamilyKind::Weibull | FamilyKind::Gamma => Some(1.0),
            FamilyKind::Lognormal => None,
        }
    }

    pub(crate) fn require_c0(self) -> Result<f64> {
        self.c0_shape()
            .ok_or_else(|| Error::Unsupported(format!("{self} has no shape at which f = g; the homogeneity test needs Weibull or Gamma")))
    }

    /// `ln E[Y^k]` for the family at `λ = 1`. Raw moments scale as `λ^{-k}`.
    pub fn ln_unit_moment(self, shape: f64, k: f64) -> f64 {
        match self {
            FamilyKind::Weibull => ln_gamma(1.0 + k / shape),
            FamilyKind::Gamma => ln_gamma(shape + k) - ln_gamma(shape),
            FamilyKind::Lognormal => 0.5 * k * k * shape * shape,
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Weibull => "weibull",
            FamilyKind::Gamma => "gamma",
            FamilyKind::Lognormal => "lognormal",
        })
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weibull" => Ok(FamilyKind::Weibull),
            "gamma" => Ok(FamilyKind::Gamma),
            "lognormal" | "log-normal" => Ok(FamilyKind::Lognormal),
            other => Err(Error::Unsupported(format!("unknown family '{other}'"))),
        }
    }
}

/// A member of one of the incubation families with validated parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncubationFamily {
    kind: FamilyKind,
    rate: f64,
    shape: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be positive and finite, got {t}")))
    }
}

impl IncubationFamily {
    pub fn new(kind: FamilyKind, rate: f64, shape: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite() && shape > 0.0 && shape.is_finite()) {
            return Err(domain(format!("{kind} parameters must be positive, got λ = {rate}, α = {shape}")));
        }
        Ok(IncubationFamily { kind, rate, shape })
    }

    pub fn weibull(rate: f64, shape: f64) -> Result<Self> {
        Self::new(FamilyKind::Weibull, rate, shape)
    }

    pub fn gamma(rate: f64, shape: f64) -> Result<Self> {
        Self::new(FamilyKind::Gamma, rate, shape)
    }

    pub fn lognormal(rate: f64, shape: f64) -> Result<Self> {
        Self::new(FamilyKind::Lognormal, rate, shape)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// `λ`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `α`.
    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn with_params(&self, rate: f64, shape: f64) -> Result<Self> {
        Self::new(self.kind, rate, shape)
    }

    pub fn ln_mean(&self) -> f64 {
        self.kind.ln_unit_moment(self.shape, 1.0) - self.rate.ln()
    }

    pub fn mean(&self) -> f64 {
        self.ln_mean().exp()
    }

    /// `ln E[Y^k]`.
    pub fn ln_raw_moment(&self, k: f64) -> f64 {
        self.kind.ln_unit_moment(self.shape, k) - k * self.rate.ln()
    }

    /// Log of the incubation density `f`.
    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.kernel().eval(t, t.ln(), false).lf)
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.ln_pdf(t).map(f64::exp)
    }

    /// Log survival `ln(1 - F(t))`.
    pub fn ln_sf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.ln_sf_unchecked(t, t.ln()))
    }

    fn ln_sf_unchecked(&self, t: f64, ln_t: f64) -> f64 {
        let (lambda, alpha) = (self.rate, self.shape);
        match self.kind {
            FamilyKind::Weibull => -(alpha * (lambda.ln() + ln_t)).exp(),
            FamilyKind::Gamma => ln_gamma_pq(alpha, lambda * t).1,
            FamilyKind::Lognormal => ln_norm_sf((ln_t + lambda.ln()) / alpha),
        }
    }

    pub fn sf(&self, t: f64) -> Result<f64> {
        self.ln_sf(t).map(f64::exp)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let (lambda, alpha) = (self.rate, self.shape);
        Ok(match self.kind {
            FamilyKind::Weibull => -(-(lambda * t).powf(alpha)).exp_m1(),
            FamilyKind::Gamma => gamma_p(alpha, lambda * t),
            FamilyKind::Lognormal => norm_cdf((t.ln() + lambda.ln()) / alpha),
        })
    }

    /// Log of the forward-time density `g(t) = (1 - F(t)) / μ`.
    pub fn ln_forward_pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.ln_sf_unchecked(t, t.ln()) - self.ln_mean())
    }

    pub fn forward_pdf(&self, t: f64) -> Result<f64> {
        self.ln_forward_pdf(t).map(f64::exp)
    }

    /// `(G(t), 1 - G(t))` where `G(t) = ∫_0^t (1 - F(s)) ds / μ`, both
    /// evaluated directly so that neither loses precision in its tail.
    pub fn forward_cdf_sf(&self, t: f64) -> Result<(f64, f64)> {
        check_time(t)?;
        let (lambda, alpha) = (self.rate, self.shape);
        Ok(match self.kind {
            FamilyKind::Weibull => {
                let (ln_p, ln_q) = ln_gamma_pq(1.0 / alpha, (lambda * t).powf(alpha));
                (ln_p.exp(), ln_q.exp())
            }
            FamilyKind::Gamma => {
                let x = lambda * t;
                let (_, ln_q) = ln_gamma_pq(alpha, x);
                let (ln_p1, ln_q1) = ln_gamma_pq(alpha + 1.0, x);
                let tail = (x.ln() - alpha.ln() + ln_q).exp();
                (ln_p1.exp() + tail, (ln_q1.exp() - tail).max(0.0))
            }
            FamilyKind::Lognormal => {
                let w = (t.ln() + lambda.ln() - alpha * alpha) / alpha;
                let body = (t.ln() + self.ln_sf_unchecked(t, t.ln()) - self.ln_mean()).exp();
                (norm_cdf(w) + body, (ln_norm_sf(w).exp() - body).max(0.0))
            }
        })
    }

    pub fn forward_cdf(&self, t: f64) -> Result<f64> {
        self.forward_cdf_sf(t).map(|(c, _)| c)
    }

    /// Inverse of the forward-time CDF by safeguarded Newton iteration on a
    /// bracket, to `|G(t) - u| < 1e-10`.
    pub fn forward_quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(domain(format!("probability must lie in (0, 1), got {u}")));
        }
        // Work on whichever tail keeps the target away from 1.
        let upper = u > 0.5;
        let target = if upper { 1.0 - u } else { u };
        let resid = |t: f64| -> Result<f64> {
            let (c, s) = self.forward_cdf_sf(t)?;
            Ok(if upper { target - s } else { c - target })
        };
        let mut lo = 0.0_f64;
        let mut hi = self.mean().max(f64::MIN_POSITIVE);
        while resid(hi)? < 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(domain("forward quantile bracket overflowed"));
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..300 {
            let r = resid(t)?;
            if r.abs() < (1e-6 * target).min(1e-10) {
                return Ok(t);
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = self.forward_pdf(t)?;
            let newton = t - r / slope;
            t = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(t);
            }
        }
        Ok(t)
    }

    /// Draws one incubation time from `f`.
    pub fn sample_incubation<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lambda, alpha) = (self.rate, self.shape);
        match self.kind {
            FamilyKind::Weibull => WeibullDist::new(1.0 / lambda, alpha).expect("validated").sample(rng),
            FamilyKind::Gamma => GammaDist::new(alpha, 1.0 / lambda).expect("validated").sample(rng),
            FamilyKind::Lognormal => LogNormal::new(-lambda.ln(), alpha).expect("validated").sample(rng),
        }
    }

    /// Smallest `t` (to relative 1e-9 on the log axis) with `1 - F(t) < tail`.
    pub fn upper_truncation(&self, tail: f64) -> f64 {
        let mut hi = self.mean().max(1e-300);
        while self.ln_sf_unchecked(hi, hi.ln()) >= tail.ln() {
            hi *= 2.0;
        }
        let mut lo = hi / 2.0;
        while self.ln_sf_unchecked(lo, lo.ln()) < tail.ln() && lo > 1e-300 {
            lo /= 2.0;
        }
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.ln_sf_unchecked(mid, mid.ln()) < tail.ln() {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi / lo - 1.0 < 1e-9 {
                break;
            }
        }
        hi
    }

    /// Largest `t` with `F(t) < mass`, found by bisection on the log axis.
    pub fn lower_truncation(&self, mass: f64) -> f64 {
        let mut lo = self.mean();
        while self.cdf(lo).unwrap_or(0.0) >= mass && lo > 1e-300 {
            lo /= 16.0;
        }
        let mut hi = lo * 16.0;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.cdf(mid).unwrap_or(0.0) < mass {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-9 {
                break;
            }
        }
        lo
    }

    pub(crate) fn kernel(&self) -> Kernel {
        Kernel::new(self.kind, self.rate, self.shape)
    }
}

/// Log densities of both components at one point, with gradients taken
/// with respect to `(ln λ, ln α)`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct PointEval {
    pub lf: f64,
    pub lg: f64,
    pub dlf: [f64; 2],
    pub dlg: [f64; 2],
}

/// Per-parameter constants for evaluating `ln f` and `ln g` in a hot loop.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Kernel {
    kind: FamilyKind,
    lambda: f64,
    ln_lambda: f64,
    alpha: f64,
    ln_alpha: f64,
    /// `ln μ`
    ln_mean: f64,
    /// Weibull: `ψ(1 + 1/α)`; Gamma: `ψ(α)`.
    psi: f64,
    /// Gamma: `ln Γ(α)`.
    lgam: f64,
}

impl Kernel {
    pub fn new(kind: FamilyKind, lambda: f64, alpha: f64) -> Self {
        let (psi, lgam) = match kind {
            FamilyKind::Weibull => (digamma(1.0 + 1.0 / alpha), 0.0),
            FamilyKind::Gamma => (digamma(alpha), ln_gamma(alpha)),
            FamilyKind::Lognormal => (0.0, 0.0),
        };
        Kernel {
            kind,
            lambda,
            ln_lambda: lambda.ln(),
            alpha,
            ln_alpha: alpha.ln(),
            ln_mean: kind.ln_unit_moment(alpha, 1.0) - lambda.ln(),
            psi,
            lgam,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, ln_t: f64, grad: bool) -> PointEval {
        let a = self.alpha;
        match self.kind {
            FamilyKind::Weibull => {
                let l = self.ln_lambda + ln_t;
                let s = (a * l).exp();
                let lf = self.ln_alpha + a * l - ln_t - s;
                let lg = -s - self.ln_mean;
                if !grad {
                    return PointEval { lf, lg, ..Default::default() };
                }
                let asl = a * s * l;
                PointEval {
                    lf,
                    lg,
                    dlf: [a * (1.0 - s), 1.0 + a * l - asl],
                    dlg: [1.0 - a * s, -asl + self.psi / a],
                }
            }
            FamilyKind::Gamma => {
                let x = self.lambda * t;
                let ln_x = self.ln_lambda + ln_t;
                let lf = a * ln_x - ln_t - x - self.lgam;
                let ln_q = ln_gamma_pq(a, x).1;
                let lg = ln_q - self.ln_mean;
                if !grad {
                    return PointEval { lf, lg, ..Default::default() };
                }
                // d ln Q / d ln λ = -x f_unit(x) / Q
                let dq_du = -(a * ln_x - x - self.lgam - ln_q).exp();
                let h = 1e-5 * a;
                let dq_da = (ln_gamma_pq(a + h, x).1 - ln_gamma_pq(a - h, x).1) / (2.0 * h);
                PointEval {
                    lf,
                    lg,
                    dlf: [a - x, a * (ln_x - self.psi)],
                    dlg: [dq_du + 1.0, a * dq_da - 1.0],
                }
            }
            FamilyKind::Lognormal => {
                let z = (ln_t + self.ln_lambda) / a;
                let lf = -ln_t - self.ln_alpha + ln_norm_pdf(z);
                let ln_sf = ln_norm_sf(z);
                let lg = ln_sf - self.ln_mean;
                if !grad {
                    return PointEval { lf, lg, ..Default::default() };
                }
                let mills = (ln_norm_pdf(z) - ln_sf).exp();
                PointEval {
                    lf,
                    lg,
                    dlf: [-z / a, z * z - 1.0],
                    dlg: [1.0 - mills / a, mills * z - a * a],
                }
            }
        }
    }
}

/// Incubation density `f(t; λ, α)`.
pub fn pdf_f(family: &IncubationFamily, t: f64) -> Result<f64> {
    family.pdf(t)
}

/// Forward-time density `g(t; λ, α)`.
pub fn pdf_g(family: &IncubationFamily, t: f64) -> Result<f64> {
    family.forward_pdf(t)
}

/// Duration density `h(t; λ, α, p)`.
pub fn pdf_h(model: &MixtureModel, t: f64) -> Result<f64> {
    model.pdf(t)
}

/// The observed-duration mixture `h = p f + (1 - p) g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub family: IncubationFamily,
    pub p: f64,
}

impl MixtureModel {
    pub fn new(family: IncubationFamily, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("mixing weight must lie in [0, 1], got {p}")));
        }
        Ok(MixtureModel { family, p })
    }

    pub fn from_params(kind: FamilyKind, rate: f64, shape: f64, p: f64) -> Result<Self> {
        Self::new(IncubationFamily::new(kind, rate, shape)?, p)
    }

    pub fn ln_pdf(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let e = self.family.kernel().eval(t, t.ln(), false);
        Ok(mix_ln(self.p, e.lf, e.lg))
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.ln_pdf(t).map(f64::exp)
    }

    /// `H(t) = p F(t) + (1 - p) G(t)`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        if t == f64::INFINITY {
            return Ok(1.0);
        }
        Ok(self.p * self.family.cdf(t)? + (1.0 - self.p) * self.family.forward_cdf(t)?)
    }

    /// Draws one duration: incubation with probability `p`, forward time otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let branch: f64 = rng.random();
        if branch < self.p {
            Ok(self.family.sample_incubation(rng))
        } else {
            let u: f64 = rng.sample(rand_distr::Open01);
            self.family.forward_quantile(u)
        }
    }
}

/// `ln(p e^{lf} + (1 - p) e^{lg})` handling the boundary weights exactly.
#[inline]
pub(crate) fn mix_ln(p: f64, lf: f64, lg: f64) -> f64 {
    if p >= 1.0 {
        lf
    } else if p <= 0.0 {
        lg
    } else {
        crate::special::ln_add_exp(p.ln() + lf, (-p).ln_1p() + lg)
    }
}

/// Null-model scores at `α = α₀ = 1`:
/// `X = ∂ ln f / ∂λ`, `Y₁ = ∂ ln f / ∂α`, `Y₂ = ∂ ln g / ∂α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub x: f64,
    pub y1: f64,
    pub y2: f64,
}

/// Analytic null scores of a family with a C0 point, evaluated at the
/// exponential model with rate `lambda0`.
///
/// Weibull: `X = 1/λ₀ - t`, `Y₁ = 1 + (1 - λ₀t) ln(λ₀t)`,
/// `Y₂ = 1 - γ - λ₀t ln(λ₀t)`.
/// Gamma: `X = 1/λ₀ - t`, `Y₁ = ln(λ₀t) + γ`,
/// `Y₂ = ln(λ₀t) + e^{λ₀t} E₁(λ₀t) + γ - 1`.
pub fn score_vector(kind: FamilyKind, lambda0: f64, t: f64) -> Result<ScoreVector> {
    kind.require_c0()?;
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(domain(format!("λ₀ must be positive, got {lambda0}")));
    }
    check_time(t)?;
    let x = lambda0 * t;
    let ln_x = x.ln();
    let score_lambda = 1.0 / lambda0 - t;
    Ok(match kind {
        FamilyKind::Weibull => ScoreVector {
            x: score_lambda,
            y1: 1.0 + (1.0 - x) * ln_x,
            y2: 1.0 - EULER_GAMMA - x * ln_x,
        },
        FamilyKind::Gamma => ScoreVector {
            x: score_lambda,
            y1: ln_x + EULER_GAMMA,
            y2: ln_x + scaled_exp_e1(x) + EULER_GAMMA - 1.0,
        },
        FamilyKind::Lognormal => unreachable!("rejected by require_c0"),
    })
}

/// Identifiability of `(λ, α, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Identifiability {
    FullyIdentifiable,
    /// `(λ, α)` identifiable, `p` not.
    SharedParamsOnlyPNotIdentifiable,
}

/// Limit of the hazard `f(t) / (1 - F(t))` as `t → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum HazardLimit {
    Zero,
    Infinity,
    Finite(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityClass {
    pub category: Identifiability,
    pub hazard_limit: HazardLimit,
}

/// Classifies the identifiability of the mixture parameters for a family
/// member. Only an exactly constant hazard (the exponential, `α == 1` for
/// Weibull and Gamma) loses identifiability of `p`.
pub fn identifiability_class(family: &IncubationFamily) -> IdentifiabilityClass {
    use HazardLimit::*;
    use Identifiability::*;
    let (lambda, alpha) = (family.rate(), family.shape());
    let exponential = alpha == 1.0;
    let hazard_limit = match family.kind() {
        FamilyKind::Lognormal => Zero,
        FamilyKind::Gamma => Finite(lambda),
        FamilyKind::Weibull if exponential => Finite(lambda),
        FamilyKind::Weibull if alpha < 1.0 => Zero,
        FamilyKind::Weibull => Infinity,
    };
    let category = match family.kind() {
        FamilyKind::Weibull | FamilyKind::Gamma if exponential => SharedParamsOnlyPNotIdentifiable,
        _ => FullyIdentifiable,
    };
    IdentifiabilityClass { category, hazard_limit }
}
