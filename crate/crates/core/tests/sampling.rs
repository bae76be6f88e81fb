mod common;

use common::ks_one;
use fimix::families::{FamilyKind, IncubationFamily, MixtureModel};
use fimix::quad::{integrate, integrate_log_axis, QuadOptions};
use fimix::rng::{stream, Domain};
use fimix::simulate::sample_mixture;

const DRAWS: usize = 100_000;
const KS_BOUND: f64 = 0.006;

#[test]
fn pure_incubation_branch_follows_f() {
    for fam in [
        IncubationFamily::weibull(0.7, 1.65).unwrap(),
        IncubationFamily::gamma(2.0, 0.6).unwrap(),
        IncubationFamily::lognormal(0.4, 0.8).unwrap(),
    ] {
        let s = sample_mixture(&MixtureModel::new(fam, 1.0).unwrap(), DRAWS, 11).unwrap();
        let d = ks_one(s.times(), |t| fam.cdf(t).unwrap());
        assert!(d < KS_BOUND, "{fam:?}: {d}");
    }
}

#[test]
fn homogeneous_weibull_is_exponential() {
    for p in [0.0, 0.4, 1.0] {
        let m = MixtureModel::new(IncubationFamily::weibull(1.3, 1.0).unwrap(), p).unwrap();
        let s = sample_mixture(&m, DRAWS, 12).unwrap();
        let d = ks_one(s.times(), |t| 1.0 - (-1.3 * t).exp());
        assert!(d < KS_BOUND, "p={p}: {d}");
    }
}

#[test]
fn forward_sampler_matches_quadrature_cdf() {
    let opts = QuadOptions::default();
    for kind in [FamilyKind::Weibull, FamilyKind::Gamma, FamilyKind::Lognormal] {
        for (rate, shape) in [(1.0, 0.6), (0.2, 1.65), (3.0, 2.5)] {
            let fam = IncubationFamily::new(kind, rate, shape).unwrap();
            let mut rng = stream(13, Domain::Replicate, 0);
            let draws: Vec<f64> = (0..DRAWS)
                .map(|_| {
                    let u: f64 = rand::Rng::sample(&mut rng, rand_distr::Open01);
                    fam.forward_quantile(u).unwrap()
                })
                .collect();
            let d = ks_quadrature(draws, &fam, opts);
            assert!(d < KS_BOUND, "{kind} ({rate}, {shape}): {d}");
        }
    }
}

/// KS distance against `G(t) = ∫₀ᵗ (1 - F) / μ`, accumulated piecewise over
/// the sorted draws.
fn ks_quadrature(mut draws: Vec<f64>, fam: &IncubationFamily, opts: QuadOptions) -> f64 {
    draws.sort_by(f64::total_cmp);
    let mu = fam.mean();
    let n = draws.len() as f64;
    let (mut prev, mut cdf, mut d) = (0.0, 0.0, 0.0f64);
    for (i, &t) in draws.iter().enumerate() {
        cdf += integrate(|s| fam.sf(s).unwrap(), prev, t, opts).unwrap() / mu;
        prev = t;
        d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    d
}

#[test]
fn forward_mean_matches_quadrature() {
    let fam = IncubationFamily::weibull(1.0, 2.0).unwrap();
    let m = MixtureModel::new(fam, 0.0).unwrap();
    let s = sample_mixture(&m, DRAWS, 14).unwrap();
    let opts = QuadOptions::default();
    let hi = fam.upper_truncation(1e-20);
    let mean = integrate_log_axis(|t| t * fam.forward_pdf(t).unwrap(), 1e-12, hi, opts).unwrap();
    let second = integrate_log_axis(|t| t * t * fam.forward_pdf(t).unwrap(), 1e-12, hi, opts).unwrap();
    let se = ((second - mean * mean) / DRAWS as f64).sqrt();
    assert!((s.mean() - mean).abs() < 4.0 * se, "{} vs {mean} (se {se})", s.mean());
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let m = MixtureModel::from_params(FamilyKind::Gamma, 0.5, 1.8, 0.3).unwrap();
    assert_eq!(sample_mixture(&m, 500, 3).unwrap(), sample_mixture(&m, 500, 3).unwrap());
    assert_ne!(sample_mixture(&m, 500, 3).unwrap(), sample_mixture(&m, 500, 4).unwrap());
}
