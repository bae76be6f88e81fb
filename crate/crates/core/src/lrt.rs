//! Likelihood-ratio test of exponential homogeneity (`α = α₀`) and its
//! non-regular asymptotics.
//!
//! Under the null, `R_n` converges to `sup_{0≤p≤1} Z²(p)` for a unit-variance
//! Gaussian process with covariance `σ(p₁,p₂) / √(σ(p₁,p₁) σ(p₂,p₂))`, where
//! `σ(p₁,p₂) = p₁p₂σ₂₂ + (p₁+p₂)σ₁₂ + σ₁₁`. Writing
//! `(c₁(p), c₂(p)) = (cos θ, sin θ)` maps `p ∈ [0,1]` onto an arc
//! `θ ∈ [Δ₁, Δ₂]`, and the supremum has the polar representation
//!
//! ```text
//! T(ρ², η) = ρ² { 1[η∈A₁] + 1[η∈A₂] cos²(η-Δ₂) + 1[η∈A₃] cos²(η-Δ₁) }
//! ```
//!
//! with `ρ² ~ χ²₂` independent of `η ~ U[-π, π]`. The Monte Carlo law of `T`
//! calibrates p-values and critical values.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::families::{score_vector, FamilyKind};
use crate::likelihood::{fit_full, fit_null, DurationSample, FitOptions, FitResult};
use crate::quad::{integrate_log_axis, QuadOptions};
use crate::rng::{par_blocks, Domain};

/// Default number of limit draws behind a p-value.
pub const DEFAULT_PVALUE_DRAWS: usize = 1_000_000;
/// Default number of limit draws behind a critical-value table.
pub const DEFAULT_TABLE_DRAWS: usize = 10_000_000;

/// Where a set of constants came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsSource {
    ClosedFormWeibull,
    ClosedFormGamma,
    Numeric,
}

/// Covariance constants of the limiting process and the end angles of its
/// arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub sigma11: f64,
    pub sigma12: f64,
    pub sigma22: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub source: ConstantsSource,
}

impl AsymptoticConstants {
    /// Builds the constants from `(σ₁₁, σ₁₂, σ₂₂)`, taking `Δ₁`, `Δ₂` as the
    /// polar angles of `(c₁, c₂)` at `p = 0` and `p = 1`.
    ///
    /// Fails unless `σ₂₂ > 0`, `σ₁₁ - σ₁₂²/σ₂₂ > 0` and both angles are
    /// positive: the interval forms of `A₁`–`A₃` used by [`limit_statistic`]
    /// hold only in that case.
    pub fn from_sigmas(sigma11: f64, sigma12: f64, sigma22: f64, source: ConstantsSource) -> Result<Self> {
        if !(sigma22 > 0.0) {
            return Err(domain(format!("σ₂₂ must be positive, got {sigma22}")));
        }
        if !(sigma11 - sigma12 * sigma12 / sigma22 > 0.0) {
            return Err(domain("covariance of (Z₁, Z₂) is not positive definite"));
        }
        let mut c = AsymptoticConstants {
            sigma11,
            sigma12,
            sigma22,
            delta1: 0.0,
            delta2: 0.0,
            source,
        };
        c.delta1 = c.angle(0.0);
        c.delta2 = c.angle(1.0);
        c.check_angles()?;
        Ok(c)
    }

    fn check_angles(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta1 < self.delta2 && self.delta2 < FRAC_PI_2) {
            return Err(domain(format!(
                "arc end angles ({}, {}) are not both positive; the three-set representation does not apply",
                self.delta1, self.delta2
            )));
        }
        Ok(())
    }

    /// `σ(p₁, p₂)`.
    pub fn sigma(&self, p1: f64, p2: f64) -> f64 {
        p1 * p2 * self.sigma22 + (p1 + p2) * self.sigma12 + self.sigma11
    }

    fn a1(&self) -> f64 {
        (self.sigma11 - self.sigma12 * self.sigma12 / self.sigma22).sqrt()
    }

    pub fn c1(&self, p: f64) -> f64 {
        self.a1() / self.sigma(p, p).sqrt()
    }

    pub fn c2(&self, p: f64) -> f64 {
        (p + self.sigma12 / self.sigma22) * self.sigma22.sqrt() / self.sigma(p, p).sqrt()
    }

    /// Polar angle of `(c₁(p), c₂(p))`.
    pub fn angle(&self, p: f64) -> f64 {
        self.c2(p).atan2(self.c1(p))
    }
}

/// Closed-form constants for the Weibull and Gamma families; they do not
/// depend on `λ₀`.
pub fn asymptotic_constants(kind: FamilyKind) -> Result<AsymptoticConstants> {
    let pi2 = PI * PI;
    let pi4 = pi2 * pi2;
    let (s11, s12, s22, d1, d2, source) = match kind {
        FamilyKind::Weibull => (
            pi2 / 3.0 - 3.0,
            2.0 - pi2 / 6.0,
            pi2 / 6.0 - 1.0,
            ((pi4 - 6.0 * pi2 - 36.0) / (2.0 * pi4 - 30.0 * pi2 + 108.0)).sqrt().acos(),
            ((pi4 - 6.0 * pi2 - 36.0) / (pi4 - 6.0 * pi2)).sqrt().acos(),
            ConstantsSource::ClosedFormWeibull,
        ),
        FamilyKind::Gamma => {
            let num = 4.0 * pi4 - 54.0 * pi2 + 144.0;
            (
                pi2 / 3.0 - 13.0 / 4.0,
                7.0 / 4.0 - pi2 / 6.0,
                pi2 / 6.0 - 5.0 / 4.0,
                (num / ((4.0 * pi2 - 39.0) * (2.0 * pi2 - 15.0))).sqrt().acos(),
                (num / ((2.0 * pi2 - 12.0) * (2.0 * pi2 - 15.0))).sqrt().acos(),
                ConstantsSource::ClosedFormGamma,
            )
        }
        FamilyKind::Lognormal => {
            return Err(Error::Unsupported("no asymptotic constants for the lognormal family".into()))
        }
    };
    let c = AsymptoticConstants {
        sigma11: s11,
        sigma12: s12,
        sigma22: s22,
        delta1: d1,
        delta2: d2,
        source,
    };
    c.check_angles()?;
    Ok(c)
}

/// Constants computed from the null score covariance `B = Var(X, Y₁, Y₂)`,
/// integrated against the exponential(`λ₀`) density by adaptive quadrature.
pub fn numeric_constants(kind: FamilyKind, lambda0: f64) -> Result<AsymptoticConstants> {
    kind.require_c0()?;
    let b = score_covariance(kind, lambda0)?;
    let (b11, b12, b13, b22, b23, b33) = (b[0][0], b[0][1], b[0][2], b[1][1], b[1][2], b[2][2]);
    let s11 = b33 - b13 * b13 / b11;
    let s12 = b23 - b33 - b12 * b13 / b11 + b13 * b13 / b11;
    let s22 = b22 + b33 - 2.0 * b23 - b12 * b12 / b11 - b13 * b13 / b11 + 2.0 * b12 * b13 / b11;
    AsymptoticConstants::from_sigmas(s11, s12, s22, ConstantsSource::Numeric)
}

/// `Var(b)` for `b = (X, Y₁, Y₂)` under the exponential(`λ₀`) null.
pub fn score_covariance(kind: FamilyKind, lambda0: f64) -> Result<[[f64; 3]; 3]> {
    let opts = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_segments: 4000,
    };
    // Exponential mass below 1e-40/λ₀ and above 46/λ₀ is below 1e-20.
    let (lo, hi) = (1e-40 / lambda0, 46.0 / lambda0);
    let moment = |f: &dyn Fn(&[f64; 3]) -> f64| -> Result<f64> {
        let mut failed = None;
        let v = integrate_log_axis(
            |t| match score_vector(kind, lambda0, t) {
                Ok(s) => f(&[s.x, s.y1, s.y2]) * lambda0 * (-lambda0 * t).exp(),
                Err(e) => {
                    failed.get_or_insert(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            opts,
        );
        match failed {
            Some(e) => Err(e),
            None => v,
        }
    };
    let mut mean = [0.0; 3];
    for (i, m) in mean.iter_mut().enumerate() {
        *m = moment(&|b| b[i])?;
    }
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = moment(&|b| b[i] * b[j])? - mean[i] * mean[j];
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    Ok(cov)
}

/// `sup_{θ∈[Δ₁,Δ₂]} ρ² cos²(θ - η)` through the explicit sets `A₁`–`A₃`.
/// Boundary angles belong to the lower-indexed set.
pub fn limit_statistic(c: &AsymptoticConstants, rho2: f64, eta: f64) -> f64 {
    let (d1, d2) = (c.delta1, c.delta2);
    let mid = 0.5 * (d1 + d2);
    let within = |lo: f64, hi: f64| eta >= lo && eta <= hi;
    if within(d1, d2) || within(d1 - PI, d2 - PI) {
        rho2
    } else if within(d2, mid + FRAC_PI_2) || within(d2 - PI, mid - FRAC_PI_2) {
        rho2 * (eta - d2).cos().powi(2)
    } else {
        rho2 * (eta - d1).cos().powi(2)
    }
}

/// Sorted draws of `T(ρ², η)`.
pub fn sample_null_limit(c: &AsymptoticConstants, draws: usize, seed: u64) -> NullDistribution {
    let mut values = par_blocks(draws, seed, Domain::NullLimit, |rng, len, out| {
        for _ in 0..len {
            // ρ² ~ χ²₂ is exponential with mean 2.
            let u: f64 = rng.sample(rand_distr::Open01);
            let rho2 = -2.0 * u.ln();
            let eta = rng.random_range(-PI..=PI);
            out.push(limit_statistic(c, rho2, eta));
        }
    });
    values.sort_unstable_by(f64::total_cmp);
    NullDistribution {
        sorted: values,
        seed,
        constants: *c,
    }
}

/// Empirical law of the limiting statistic.
#[derive(Clone, Debug)]
pub struct NullDistribution {
    sorted: Vec<f64>,
    seed: u64,
    constants: AsymptoticConstants,
}

impl NullDistribution {
    pub fn draws(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn constants(&self) -> &AsymptoticConstants {
        &self.constants
    }

    /// Number of draws strictly greater than `x`.
    pub fn exceedances(&self, x: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&v| v <= x)
    }

    /// `(#{T > r} + 1) / (M + 1)`.
    pub fn p_value(&self, r: f64) -> f64 {
        (self.exceedances(r) + 1) as f64 / (self.sorted.len() + 1) as f64
    }

    /// Smallest draw `c` with at most `level · M` draws above it; reject
    /// when `R_n > c`.
    pub fn critical_value(&self, level: f64) -> f64 {
        let m = self.sorted.len();
        let idx = ((m as f64) * (1.0 - level)).ceil() as usize;
        self.sorted[idx.saturating_sub(1).min(m - 1)]
    }

    /// Empirical quantile `F⁻¹(q)` (lower, inverse-CDF convention).
    pub fn quantile(&self, q: f64) -> f64 {
        let m = self.sorted.len();
        let idx = ((m as f64) * q).ceil() as usize;
        self.sorted[idx.saturating_sub(1).min(m - 1)]
    }
}

/// Monte Carlo p-value of an observed statistic.
pub fn p_value(r_n: f64, c: &AsymptoticConstants, draws: usize, seed: u64) -> Result<f64> {
    if !(r_n >= 0.0) {
        return Err(domain(format!("statistic must be non-negative, got {r_n}")));
    }
    Ok(sample_null_limit(c, draws, seed).p_value(r_n))
}

/// One row of a critical-value table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub level: f64,
    pub quantile: f64,
    #[serde(rename = "M")]
    pub draws: usize,
    pub seed: u64,
    pub family: FamilyKind,
    pub version: String,
}

pub fn critical_values(kind: FamilyKind, c: &AsymptoticConstants, levels: &[f64], draws: usize, seed: u64) -> Result<Vec<CriticalValue>> {
    check_levels(levels)?;
    let dist = sample_null_limit(c, draws, seed);
    Ok(levels
        .iter()
        .map(|&level| CriticalValue {
            level,
            quantile: dist.critical_value(level),
            draws,
            seed,
            family: kind,
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
        .collect())
}

/// CSV with header `level,quantile,M,seed,family`.
pub fn critical_values_csv(rows: &[CriticalValue]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn check_levels(levels: &[f64]) -> Result<()> {
    match levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        Some(l) => Err(domain(format!("significance level must lie in (0, 1), got {l}"))),
        None if levels.is_empty() => Err(domain("no significance levels given")),
        None => Ok(()),
    }
}

/// Settings for [`local_power`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalPowerOptions {
    /// Draws of the shifted process.
    pub draws: usize,
    /// Draws of `T` behind the critical value.
    pub null_draws: usize,
    /// Spacing of the grid over `p` on which the supremum is taken.
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for LocalPowerOptions {
    fn default() -> Self {
        LocalPowerOptions {
            draws: 200_000,
            null_draws: DEFAULT_PVALUE_DRAWS,
            grid_step: 1e-3,
            seed: 1,
        }
    }
}

/// Asymptotic power against `α = α₀ + δ/√n`, `p = p₀`: the probability that
/// `sup_p {Z(p) + ω(p, p₀)}²` exceeds the null critical value, with
/// `ω(p, p₀) = δ σ(p, p₀) / √σ(p, p)`.
///
/// `(Z₁, Z₂)` is drawn with covariance `[[σ₁₁, σ₁₂], [σ₁₂, σ₂₂]]` and
/// `Z(p) = (Z₁ + p Z₂) / √σ(p, p)`. A fixed seed gives common random
/// numbers across `δ` and `p₀`.
pub fn local_power(delta: f64, p0: f64, c: &AsymptoticConstants, level: f64, opts: &LocalPowerOptions) -> Result<f64> {
    check_levels(&[level])?;
    if !(0.0..=1.0).contains(&p0) {
        return Err(domain(format!("p₀ must lie in [0, 1], got {p0}")));
    }
    if !(opts.grid_step > 0.0 && opts.grid_step <= 1.0) {
        return Err(domain("grid step must lie in (0, 1]"));
    }
    let critical = sample_null_limit(c, opts.null_draws, opts.seed).critical_value(level);
    let cells = (1.0 / opts.grid_step).round() as usize;
    let grid: Vec<(f64, f64, f64)> = (0..=cells)
        .map(|i| {
            let p = i as f64 / cells as f64;
            let inv_sd = 1.0 / c.sigma(p, p).sqrt();
            (p, inv_sd, delta * c.sigma(p, p0) * inv_sd)
        })
        .collect();
    let a1 = c.a1();
    let sd2 = c.sigma22.sqrt();
    let load = c.sigma12 / sd2;
    let hits = par_blocks(opts.draws, opts.seed, Domain::LocalPower, |rng, len, out| {
        for _ in 0..len {
            let w1: f64 = rng.sample(StandardNormal);
            let w2: f64 = rng.sample(StandardNormal);
            let z1 = a1 * w1 + load * w2;
            let z2 = sd2 * w2;
            let sup = grid
                .iter()
                .map(|&(p, inv_sd, omega)| {
                    let v = (z1 + p * z2) * inv_sd + omega;
                    v * v
                })
                .fold(0.0_f64, f64::max);
            out.push(sup > critical);
        }
    });
    Ok(hits.iter().filter(|&&h| h).count() as f64 / opts.draws as f64)
}

/// `R_n = 2{ℓ_n(full) - ℓ_n(null)}` together with both fits.
///
/// Negative gaps down to `-1e-8` are optimizer noise and clamp to zero;
/// anything more negative is an error.
pub fn lrt_fits(sample: &DurationSample, kind: FamilyKind, opts: &FitOptions) -> Result<(f64, FitResult, FitResult)> {
    kind.require_c0()?;
    let null = fit_null(sample, kind)?;
    let full = fit_full(sample, kind, opts)?;
    let r = 2.0 * (full.loglik - null.loglik);
    let r = if r >= 0.0 {
        r
    } else if r >= -1e-8 {
        0.0
    } else {
        return Err(Error::NegativeStatistic(r));
    };
    Ok((r, full, null))
}

/// The likelihood-ratio statistic `R_n`.
pub fn lrt_statistic(sample: &DurationSample, kind: FamilyKind, opts: &FitOptions) -> Result<f64> {
    lrt_fits(sample, kind, opts).map(|(r, _, _)| r)
}

/// Settings for [`lrt_test`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub fit: FitOptions,
    pub mc_draws: usize,
    pub mc_seed: u64,
    pub levels: Vec<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            fit: FitOptions::default(),
            mc_draws: DEFAULT_PVALUE_DRAWS,
            mc_seed: 1,
            levels: vec![0.10, 0.05, 0.01],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtReport {
    pub family: FamilyKind,
    pub n: usize,
    pub r_n: f64,
    pub p_value: f64,
    pub constants: AsymptoticConstants,
    pub mc_draws: usize,
    pub mc_seed: u64,
    /// Critical values keyed by level, formatted as in the input.
    pub critical_values: BTreeMap<String, f64>,
    pub full_fit: FitResult,
    pub null_fit: FitResult,
}

/// Fits both models, computes `R_n` and calibrates it against the limit law.
pub fn lrt_test(sample: &DurationSample, kind: FamilyKind, opts: &TestOptions) -> Result<LrtReport> {
    check_levels(&opts.levels)?;
    let constants = asymptotic_constants(kind)?;
    let (r_n, full_fit, null_fit) = lrt_fits(sample, kind, &opts.fit)?;
    let dist = sample_null_limit(&constants, opts.mc_draws, opts.mc_seed);
    Ok(LrtReport {
        family: kind,
        n: sample.len(),
        r_n,
        p_value: dist.p_value(r_n),
        constants,
        mc_draws: opts.mc_draws,
        mc_seed: opts.mc_seed,
        critical_values: opts.levels.iter().map(|&l| (format!("{l}"), dist.critical_value(l))).collect(),
        full_fit,
        null_fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weibull_closed_forms() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        assert_relative_eq!(c.sigma11, 0.289_868, epsilon = 1e-6);
        assert_relative_eq!(c.sigma12, 0.355_066, epsilon = 1e-6);
        assert_relative_eq!(c.sigma22, 0.644_934, epsilon = 1e-6);
        // mpmath, 30 digits.
        assert_relative_eq!(c.delta1, 0.963_517_935_523_094_5, epsilon = 1e-13);
        assert_relative_eq!(c.delta2, 1.328_900_871_331_340_3, epsilon = 1e-13);
    }

    #[test]
    fn gamma_closed_form_angles() {
        let c = asymptotic_constants(FamilyKind::Gamma).unwrap();
        assert_relative_eq!(c.delta1, 0.992_345_731_636_531_4, epsilon = 1e-13);
        assert_relative_eq!(c.delta2, 1.434_440_829_672_932_7, epsilon = 1e-13);
        assert!(asymptotic_constants(FamilyKind::Lognormal).is_err());
    }

    #[test]
    fn arccos_angles_equal_polar_angles() {
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let c = asymptotic_constants(kind).unwrap();
            assert!((c.angle(0.0) - c.delta1).abs() < 1e-10);
            assert!((c.angle(1.0) - c.delta2).abs() < 1e-10);
            let from = AsymptoticConstants::from_sigmas(c.sigma11, c.sigma12, c.sigma22, c.source).unwrap();
            assert!((from.delta1 - c.delta1).abs() < 1e-10 && (from.delta2 - c.delta2).abs() < 1e-10);
        }
    }

    #[test]
    fn unit_circle_and_sigma_symmetry() {
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let c = asymptotic_constants(kind).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..=1000 {
                let p = i as f64 / 1000.0;
                worst = worst.max((c.c1(p).powi(2) + c.c2(p).powi(2) - 1.0).abs());
                assert!(c.sigma(p, p) > 0.0);
                assert_eq!(c.sigma(p, 0.3), c.sigma(0.3, p));
            }
            assert!(worst < 1e-12, "{worst}");
        }
    }

    #[test]
    fn rejects_negative_angle_geometry() {
        // σ₁₂ < 0 puts Δ₁ below zero.
        assert!(AsymptoticConstants::from_sigmas(1.0, -0.2, 1.0, ConstantsSource::Numeric).is_err());
        assert!(AsymptoticConstants::from_sigmas(0.1, 0.5, 1.0, ConstantsSource::Numeric).is_err());
    }

    #[test]
    fn limit_statistic_boundaries() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        assert_eq!(limit_statistic(&c, 2.5, c.delta1), 2.5);
        assert_eq!(limit_statistic(&c, 2.5, c.delta2), 2.5);
        // η = Δ₂ + π/2 lies in A₃ (past Δ + π/2): the nearest arc end is Δ₁.
        let v = limit_statistic(&c, 1.0, c.delta2 + FRAC_PI_2);
        assert_relative_eq!(v, (c.delta2 - c.delta1).sin().powi(2), max_relative = 1e-12);
        // A₂/A₃ boundary at Δ + π/2: both branches agree.
        let mid = 0.5 * (c.delta1 + c.delta2) + FRAC_PI_2;
        let a2 = (mid - c.delta2).cos().powi(2);
        let a3 = (mid - c.delta1).cos().powi(2);
        assert_relative_eq!(a2, a3, max_relative = 1e-12);
        assert_relative_eq!(limit_statistic(&c, 1.0, mid), a2, max_relative = 1e-12);
    }

    #[test]
    fn limit_statistic_is_arc_supremum() {
        // Brute-force supremum over a fine θ grid as the oracle.
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let c = asymptotic_constants(kind).unwrap();
            for i in 0..=2000 {
                let eta = -PI + 2.0 * PI * i as f64 / 2000.0;
                let brute = (0..=20_000)
                    .map(|j| {
                        let th = c.delta1 + (c.delta2 - c.delta1) * j as f64 / 20_000.0;
                        (th - eta).cos().powi(2)
                    })
                    .fold(0.0_f64, f64::max);
                let got = limit_statistic(&c, 1.0, eta);
                assert!((got - brute).abs() < 1e-8, "{kind} η={eta}: {got} vs {brute}");
            }
        }
    }

    #[test]
    fn p_value_edges_and_monotonicity() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        let m = 100_000;
        let d = sample_null_limit(&c, m, 3);
        assert!((d.p_value(0.0) - 1.0).abs() <= 1.0 / (m as f64 + 1.0));
        assert_eq!(d.p_value(1e6), 1.0 / (m as f64 + 1.0));
        let mut last = 1.0;
        for i in 0..200 {
            let p = d.p_value(i as f64 * 0.1);
            assert!(p <= last);
            last = p;
        }
        assert_eq!(p_value(1.3, &c, 50_000, 9).unwrap(), p_value(1.3, &c, 50_000, 9).unwrap());
        assert!(p_value(-1.0, &c, 10, 1).is_err());
    }

    #[test]
    fn limit_draws_bracketed_by_chi_squares() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        let d = sample_null_limit(&c, 400_000, 5);
        let m = d.len() as f64;
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let (c1, c2) = (ChiSquared::new(1.0).unwrap(), ChiSquared::new(2.0).unwrap());
        for &x in &[0.1, 0.5, 1.0, 2.0, 3.841, 6.0, 9.0] {
            let ecdf = 1.0 - d.exceedances(x) as f64 / m;
            let se = (ecdf * (1.0 - ecdf) / m).sqrt();
            assert!(ecdf >= c2.cdf(x) - 3.0 * se && ecdf <= c1.cdf(x) + 3.0 * se, "x={x}: {ecdf}");
        }
    }

    #[test]
    fn critical_value_csv_layout() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        let rows = critical_values(FamilyKind::Weibull, &c, &[0.05], 10_000, 7).unwrap();
        let csv = critical_values_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("level,quantile,M,seed,family,version"));
        assert!(lines.next().unwrap().contains(",10000,7,weibull,"));
        assert!(critical_values(FamilyKind::Weibull, &c, &[1.5], 10, 1).is_err());
    }

    #[test]
    fn numeric_constants_match_closed_forms() {
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let closed = asymptotic_constants(kind).unwrap();
            for lambda0 in [0.2, 1.0, 7.5] {
                let num = numeric_constants(kind, lambda0).unwrap();
                for (a, b) in [
                    (num.sigma11, closed.sigma11),
                    (num.sigma12, closed.sigma12),
                    (num.sigma22, closed.sigma22),
                    (num.delta1, closed.delta1),
                    (num.delta2, closed.delta2),
                ] {
                    assert!((a - b).abs() < 1e-8, "{kind} λ₀={lambda0}: {a} vs {b}");
                }
            }
        }
        assert!(numeric_constants(FamilyKind::Lognormal, 1.0).is_err());
    }

    #[test]
    fn null_scores_have_zero_mean() {
        use crate::rng::stream;
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let mut rng = stream(11, Domain::Replicate, 0);
            let lambda0 = 1.7;
            let n = 1_000_000;
            let mut sums = [0.0; 3];
            let mut sq = [0.0; 3];
            for _ in 0..n {
                let u: f64 = rng.sample(rand_distr::Open01);
                let s = score_vector(kind, lambda0, -u.ln() / lambda0).unwrap();
                for (i, v) in [s.x, s.y1, s.y2].into_iter().enumerate() {
                    sums[i] += v;
                    sq[i] += v * v;
                }
            }
            for i in 0..3 {
                let mean = sums[i] / n as f64;
                let se = ((sq[i] / n as f64 - mean * mean) / n as f64).sqrt();
                assert!(mean.abs() < 5.0 * se, "{kind} component {i}: {mean} (se {se})");
            }
        }
    }

    /// `P(T ≤ x) = (1/2π) ∫ {1 - exp(-x / (2 w(η)))} dη` with `w(η) = T(1, η)`.
    fn exact_cdf(c: &AsymptoticConstants, x: f64) -> f64 {
        let opts = QuadOptions::default();
        let f = |eta: f64| {
            let w = limit_statistic(c, 1.0, eta);
            if w <= 0.0 {
                1.0
            } else {
                1.0 - (-x / (2.0 * w)).exp()
            }
        };
        let mid = 0.5 * (c.delta1 + c.delta2);
        let mut cuts = [
            -PI,
            c.delta1 - PI,
            c.delta2 - PI,
            mid - FRAC_PI_2,
            c.delta1,
            c.delta2,
            mid + FRAC_PI_2,
            PI,
        ];
        cuts.sort_by(f64::total_cmp);
        let total: f64 = cuts
            .windows(2)
            .map(|w| crate::quad::integrate(f, w[0], w[1], opts).unwrap())
            .sum();
        total / (2.0 * PI)
    }

    #[test]
    fn monte_carlo_tail_matches_exact_cdf() {
        for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
            let c = asymptotic_constants(kind).unwrap();
            let d = sample_null_limit(&c, 1_000_000, 21);
            let m = d.len() as f64;
            for &x in &[0.5, 1.5, 2.7, 3.84, 6.63] {
                let exact = 1.0 - exact_cdf(&c, x);
                let mc = d.exceedances(x) as f64 / m;
                let se = (exact * (1.0 - exact) / m).sqrt();
                assert!((mc - exact).abs() < 4.0 * se, "{kind} x={x}: {mc} vs {exact}");
            }
        }
    }

    #[test]
    fn local_power_at_null_is_level() {
        let c = asymptotic_constants(FamilyKind::Weibull).unwrap();
        let opts = LocalPowerOptions {
            draws: 40_000,
            null_draws: 400_000,
            grid_step: 1e-3,
            seed: 4,
        };
        let p0 = local_power(0.0, 0.5, &c, 0.05, &opts).unwrap();
        let se = (0.05 * 0.95 / 40_000.0_f64).sqrt();
        assert!((p0 - 0.05).abs() < 4.0 * se + 0.003, "{p0}");
        let p1 = local_power(2.0, 0.5, &c, 0.05, &opts).unwrap();
        let p2 = local_power(4.0, 0.5, &c, 0.05, &opts).unwrap();
        assert!(p0 < p1 && p1 < p2, "{p0} {p1} {p2}");
        assert!(local_power(1.0, 1.5, &c, 0.05, &opts).is_err());
    }
}
