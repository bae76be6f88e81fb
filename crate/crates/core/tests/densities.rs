mod common;

use common::{score_fd_error, score_grid, total_mass};
use fimix::families::{pdf_f, pdf_g, pdf_h, FamilyKind, IncubationFamily, MixtureModel};

fn grid() -> Vec<IncubationFamily> {
    let mut out = Vec::new();
    for kind in [FamilyKind::Weibull, FamilyKind::Gamma, FamilyKind::Lognormal] {
        for rate in [0.05, 1.0, 3.0] {
            for shape in [0.5, 1.0, 1.65, 3.0] {
                out.push(IncubationFamily::new(kind, rate, shape).unwrap());
            }
        }
    }
    out
}

#[test]
fn densities_integrate_to_one() {
    for fam in grid() {
        let f = total_mass(&fam, |t| pdf_f(&fam, t).unwrap());
        let g = total_mass(&fam, |t| pdf_g(&fam, t).unwrap());
        let m = MixtureModel::new(fam, 0.35).unwrap();
        let h = total_mass(&fam, |t| pdf_h(&m, t).unwrap());
        for (name, v) in [("f", f), ("g", g), ("h", h)] {
            assert!((v - 1.0).abs() < 1e-8, "{name} for {fam:?}: {v}");
        }
    }
}

#[test]
fn homogeneity_point_collapses_mixture() {
    for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
        for rate in [0.1, 1.0, 4.0] {
            let fam = IncubationFamily::new(kind, rate, 1.0).unwrap();
            for i in 0..200 {
                let t = 10f64.powf(-4.0 + 6.0 * i as f64 / 199.0) / rate;
                let (f, g) = (pdf_f(&fam, t).unwrap(), pdf_g(&fam, t).unwrap());
                assert!((f - g).abs() <= 1e-12 * f.max(1e-300), "{kind} λ={rate} t={t}: {f} vs {g}");
                for p in [0.0, 0.3, 1.0] {
                    let h = pdf_h(&MixtureModel::new(fam, p).unwrap(), t).unwrap();
                    assert!((h - f).abs() <= 1e-12 * f.max(1e-300));
                }
            }
        }
    }
}

#[test]
fn forward_cdf_matches_quadrature() {
    use fimix::quad::{integrate, QuadOptions};
    for fam in grid() {
        for &t in &[0.1, 1.0, 5.0, 20.0] {
            let t = t / fam.rate();
            let q = integrate(|s| fam.sf(s).unwrap(), 0.0, t, QuadOptions::default()).unwrap() / fam.mean();
            let c = fam.forward_cdf(t).unwrap();
            assert!((q - c).abs() < 1e-9, "{fam:?} t={t}: {q} vs {c}");
        }
    }
}

#[test]
fn scores_match_finite_differences() {
    for kind in [FamilyKind::Weibull, FamilyKind::Gamma] {
        for lambda0 in [0.3, 1.0, 2.5] {
            let e = score_fd_error(kind, lambda0, &score_grid(lambda0));
            assert!(e < 1e-6, "{kind} λ₀={lambda0}: {e}");
        }
    }
}
