//! Pearson chi-square goodness of fit for a fitted mixture.
//!
//! Durations are binned, expected counts `E_i = n ∫ h` come from quadrature of
//! the fitted density, and `G_n = Σ (O_i - E_i)² / E_i` is referred to a
//! chi-square law with `k - 4` degrees of freedom (three fitted parameters).

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Error, Result};
use crate::families::MixtureModel;
use crate::likelihood::DurationSample;
use crate::quad::gauss_legendre;

/// Number of fitted parameters subtracted from the degrees of freedom, on top
/// of the one lost to the fixed total.
const FITTED_PARAMS: i64 = 3;

/// A half-open bin `[lower, upper)`; `upper = None` means unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: Option<f64>,
}

impl Interval {
    fn upper_or_inf(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    #[serde(rename = "G_n")]
    pub statistic: f64,
    pub k: usize,
    pub df: i64,
    pub p_value: f64,
    pub intervals: Vec<Interval>,
    #[serde(rename = "O")]
    pub observed: Vec<u64>,
    #[serde(rename = "E")]
    pub expected: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofOptions {
    /// Bins are merged until every expected count reaches this value.
    pub min_expected: f64,
    /// Gauss–Legendre panels per unit of `ln t` (at least this many per bin).
    pub resolution: usize,
}

impl Default for GofOptions {
    fn default() -> Self {
        GofOptions {
            min_expected: 5.0,
            resolution: 16,
        }
    }
}

/// `[0, 0.5), [0.5, 1.5), …, [14.5, 15.5), [15.5, ∞)`: seventeen bins centred
/// on whole days.
pub fn default_edges() -> Vec<f64> {
    let mut e = vec![0.0, 0.5];
    e.extend((1..=15).map(|i| i as f64 + 0.5));
    e.push(f64::INFINITY);
    e
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(domain("need at least one interval"));
    }
    if edges[0] != 0.0 || *edges.last().unwrap() != f64::INFINITY {
        return Err(domain("interval edges must start at 0 and end at infinity"));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain("interval edges must be strictly increasing"));
    }
    Ok(())
}

/// Survival `1 - H(t)` without cancellation.
fn mixture_sf(model: &MixtureModel, t: f64) -> Result<f64> {
    let f = model.family;
    let (_, sg) = f.forward_cdf_sf(t)?;
    Ok(model.p * f.sf(t)? + (1.0 - model.p) * sg)
}

/// Span outside of which the fitted mass is below about 1e-15 at each end.
fn support(model: &MixtureModel) -> Result<(f64, f64)> {
    let f = model.family;
    let lo = f.lower_truncation(1e-16).min(1e-16 * f.mean()).max(1e-300);
    let mut hi = f.mean().max(1.0);
    while mixture_sf(model, hi)? > 1e-16 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(domain("fitted distribution has no finite effective support"));
        }
    }
    Ok((lo, hi))
}

/// `n ∫ h` over each bin defined by `edges`, by composite Gauss–Legendre on
/// the `ln t` axis.
pub fn expected_counts(model: &MixtureModel, edges: &[f64], n: usize, resolution: usize) -> Result<Vec<f64>> {
    check_edges(edges)?;
    if resolution == 0 {
        return Err(domain("quadrature resolution must be positive"));
    }
    let (lo, hi) = support(model)?;
    let mut failed = None;
    let mut density = |x: f64| {
        let t = x.exp();
        match model.ln_pdf(t) {
            Ok(l) => (l + x).exp(),
            Err(e) => {
                failed.get_or_insert(e);
                0.0
            }
        }
    };
    let mut out = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let a = w[0].max(lo);
        let b = w[1].min(hi);
        let mass = if a < b {
            let (la, lb) = (a.ln(), b.ln());
            let panels = resolution.max((resolution as f64 * (lb - la)).ceil() as usize);
            gauss_legendre(&mut density, la, lb, panels)
        } else {
            0.0
        };
        out.push(n as f64 * mass);
    }
    match failed {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn observed_counts(sample: &DurationSample, edges: &[f64]) -> Vec<u64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0u64; bins];
    for &t in sample.times() {
        // Bin i holds edges[i] ≤ t < edges[i + 1].
        let i = edges.partition_point(|&e| e <= t) - 1;
        counts[i.min(bins - 1)] += 1;
    }
    counts
}

/// Merges adjacent bins right to left until every expected count reaches
/// `min_expected`; a short leftmost remainder joins its right neighbour.
fn merge(edges: &[f64], observed: &[u64], expected: &[f64], min_expected: f64) -> (Vec<f64>, Vec<u64>, Vec<f64>) {
    let mut bins: Vec<(f64, f64, u64, f64)> = Vec::new();
    let mut acc: Option<(f64, f64, u64, f64)> = None;
    for i in (0..observed.len()).rev() {
        let (lo, hi) = (edges[i], edges[i + 1]);
        let cur = match acc {
            Some((_, h, o, e)) => (lo, h, o + observed[i], e + expected[i]),
            None => (lo, hi, observed[i], expected[i]),
        };
        if cur.3 >= min_expected {
            bins.push(cur);
            acc = None;
        } else {
            acc = Some(cur);
        }
    }
    if let Some((lo, _, o, e)) = acc {
        match bins.last_mut() {
            Some(last) => {
                last.0 = lo;
                last.2 += o;
                last.3 += e;
            }
            None => bins.push((lo, f64::INFINITY, o, e)),
        }
    }
    bins.reverse();
    let mut new_edges: Vec<f64> = bins.iter().map(|b| b.0).collect();
    new_edges.push(f64::INFINITY);
    (
        new_edges,
        bins.iter().map(|b| b.2).collect(),
        bins.iter().map(|b| b.3).collect(),
    )
}

/// Chi-square goodness-of-fit test of `model` against `sample`.
///
/// `edges` defaults to [`default_edges`]; otherwise it must start at 0, end at
/// infinity and increase strictly.
pub fn gof_test(sample: &DurationSample, model: &MixtureModel, edges: Option<&[f64]>, opts: &GofOptions) -> Result<GofReport> {
    let default;
    let edges = match edges {
        Some(e) => e,
        None => {
            default = default_edges();
            &default
        }
    };
    check_edges(edges)?;
    let n = sample.len();
    let observed = observed_counts(sample, edges);
    let expected = expected_counts(model, edges, n, opts.resolution)?;
    let (edges, observed, expected) = merge(edges, &observed, &expected, opts.min_expected);
    let k = observed.len();
    let df = k as i64 - FITTED_PARAMS - 1;
    if df < 1 {
        return Err(Error::SampleTooSmall { intervals: k, df });
    }
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let p_value = ChiSquared::new(df as f64).expect("df ≥ 1").sf(statistic);
    let intervals = edges
        .windows(2)
        .map(|w| Interval {
            lower: w[0],
            upper: w[1].is_finite().then_some(w[1]),
        })
        .collect();
    Ok(GofReport {
        statistic,
        k,
        df,
        p_value,
        intervals,
        observed,
        expected,
    })
}

impl GofReport {
    pub fn upper_edges(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::upper_or_inf).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::IncubationFamily;
    use crate::rng::{stream, Domain};

    fn model() -> MixtureModel {
        MixtureModel::new(IncubationFamily::weibull(0.15, 1.6).unwrap(), 0.6).unwrap()
    }

    fn draw(m: &MixtureModel, n: usize, seed: u64) -> DurationSample {
        let mut rng = stream(seed, Domain::Replicate, 0);
        DurationSample::raw((0..n).map(|_| m.sample(&mut rng).unwrap()).collect()).unwrap()
    }

    #[test]
    fn expected_counts_match_closed_form_cdf() {
        for m in [
            model(),
            MixtureModel::new(IncubationFamily::gamma(0.4, 0.3).unwrap(), 0.3).unwrap(),
            MixtureModel::new(IncubationFamily::lognormal(0.2, 0.9).unwrap(), 0.7).unwrap(),
        ] {
            let edges = default_edges();
            let e = expected_counts(&m, &edges, 1, 16).unwrap();
            for (i, w) in edges.windows(2).enumerate() {
                let exact = if w[1].is_finite() {
                    m.cdf(w[1]).unwrap() - m.cdf(w[0]).unwrap()
                } else {
                    mixture_sf(&m, w[0]).unwrap()
                };
                assert!((e[i] - exact).abs() < 1e-10, "bin {i}: {} vs {exact}", e[i]);
            }
            assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn report_invariants() {
        let m = model();
        let s = draw(&m, 800, 2);
        let r = gof_test(&s, &m, None, &GofOptions::default()).unwrap();
        assert_eq!(r.observed.iter().sum::<u64>(), 800);
        assert!((r.expected.iter().sum::<f64>() - 800.0).abs() < 1e-6);
        assert!(r.expected.iter().all(|&e| e >= 5.0));
        assert_eq!(r.df, r.k as i64 - 4);
        assert!(r.statistic >= 0.0 && (0.0..=1.0).contains(&r.p_value));
        assert_eq!(r.intervals.first().unwrap().lower, 0.0);
        assert_eq!(r.intervals.last().unwrap().upper, None);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("G_n").is_some() && json.get("O").is_some() && json.get("E").is_some());
    }

    #[test]
    fn resolution_doubling_is_stable() {
        let m = model();
        let s = draw(&m, 2000, 3);
        let a = gof_test(&s, &m, None, &GofOptions { resolution: 16, ..Default::default() }).unwrap();
        let b = gof_test(&s, &m, None, &GofOptions { resolution: 32, ..Default::default() }).unwrap();
        assert!(((a.statistic - b.statistic) / a.statistic).abs() < 1e-6);
    }

    #[test]
    fn refine_then_merge_is_invariant() {
        let m = model();
        let s = draw(&m, 600, 4);
        let coarse = gof_test(&s, &m, None, &GofOptions::default()).unwrap();
        // Supplying exactly the merged edges reproduces the statistic.
        let mut edges: Vec<f64> = coarse.intervals.iter().map(|i| i.lower).collect();
        edges.push(f64::INFINITY);
        let again = gof_test(&s, &m, Some(&edges), &GofOptions::default()).unwrap();
        assert_eq!(again.k, coarse.k);
        assert!((again.statistic - coarse.statistic).abs() < 1e-9 * coarse.statistic.max(1.0));
    }

    #[test]
    fn merging_collapses_small_samples() {
        let m = model();
        let s = draw(&m, 12, 5);
        match gof_test(&s, &m, None, &GofOptions::default()) {
            Err(Error::SampleTooSmall { df, .. }) => assert!(df < 1),
            other => panic!("{other:?}"),
        }
        let e = [0.0, 1.0, f64::INFINITY];
        assert!(matches!(
            gof_test(&draw(&m, 500, 6), &m, Some(&e), &GofOptions::default()),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn merge_runs_right_to_left() {
        let edges = [0.0, 1.0, 2.0, 3.0, 4.0, f64::INFINITY];
        let (e, o, x) = merge(&edges, &[10, 9, 3, 2, 1], &[10.0, 9.0, 3.0, 2.0, 1.0], 5.0);
        assert_eq!(e, vec![0.0, 1.0, 2.0, f64::INFINITY]);
        assert_eq!(o, vec![10, 9, 6]);
        assert_eq!(x, vec![10.0, 9.0, 6.0]);
        let (e, o, _) = merge(&edges, &[1, 9, 3, 2, 1], &[1.0, 9.0, 3.0, 2.0, 1.0], 5.0);
        assert_eq!(e, vec![0.0, 2.0, f64::INFINITY]);
        assert_eq!(o, vec![10, 6]);
    }

    #[test]
    fn rejects_bad_edges() {
        let m = model();
        let s = draw(&m, 100, 7);
        for bad in [vec![0.5, f64::INFINITY], vec![0.0, 3.0], vec![0.0, 2.0, 2.0, f64::INFINITY]] {
            assert!(gof_test(&s, &m, Some(&bad), &GofOptions::default()).is_err());
        }
    }
}
