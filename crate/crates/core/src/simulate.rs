//! Data generation and the Monte Carlo harness for size and power studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::families::{FamilyKind, MixtureModel};
use crate::likelihood::{DurationSample, FitOptions, Provenance};
use crate::lrt::{asymptotic_constants, check_levels, lrt_statistic, sample_null_limit, DEFAULT_PVALUE_DRAWS};
use crate::rng::{stream, Domain};

/// `n` draws from `model`, on stream `(seed, replicate 0)`.
pub fn sample_mixture(model: &MixtureModel, n: usize, seed: u64) -> Result<DurationSample> {
    replicate_sample(model, n, seed, 0)
}

/// The dataset of replicate `index` in a study seeded with `seed`.
pub fn replicate_sample(model: &MixtureModel, n: usize, seed: u64, index: u64) -> Result<DurationSample> {
    let mut rng = stream(seed, Domain::Replicate, index);
    let times = (0..n).map(|_| model.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    DurationSample::new(times, Provenance::Raw, Some(seed))
}

/// Runs `f` on a pool of `threads` workers, or on the current pool if `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| domain(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: FamilyKind,
    /// `(λ, α, p)` of the data-generating model.
    pub truth: (f64, f64, f64),
    pub n: usize,
    pub replicates: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    /// Worker cap; results do not depend on it.
    pub threads: Option<usize>,
    /// Draws of the limit law behind the critical values.
    pub null_draws: usize,
    /// Overrides the critical values, one per level.
    pub critical_values: Option<Vec<f64>>,
    pub fit: FitOptions,
}

impl SimConfig {
    pub fn new(family: FamilyKind, truth: (f64, f64, f64), n: usize, replicates: usize, seed: u64) -> Self {
        SimConfig {
            family,
            truth,
            n,
            replicates,
            levels: vec![0.10, 0.05, 0.01],
            seed,
            threads: None,
            null_draws: DEFAULT_PVALUE_DRAWS,
            critical_values: None,
            fit: FitOptions {
                keep_trace: false,
                ..FitOptions::default()
            },
        }
    }

    fn validate(&self) -> Result<MixtureModel> {
        if self.replicates == 0 {
            return Err(domain("need at least one replicate"));
        }
        if self.n == 0 {
            return Err(domain("sample size must be positive"));
        }
        check_levels(&self.levels)?;
        if let Some(c) = &self.critical_values {
            if c.len() != self.levels.len() {
                return Err(domain("one critical value per level is required"));
            }
        }
        let (rate, shape, p) = self.truth;
        MixtureModel::from_params(self.family, rate, shape, p)
    }

    fn critical_values(&self) -> Result<Vec<f64>> {
        if let Some(c) = &self.critical_values {
            return Ok(c.clone());
        }
        let dist = sample_null_limit(&asymptotic_constants(self.family)?, self.null_draws, self.seed);
        Ok(self.levels.iter().map(|&l| dist.critical_value(l)).collect())
    }
}

/// Likelihood-ratio statistics of every replicate, in replicate order.
/// Replicates whose fit fails are `Err` entries and do not abort the study.
pub fn replicate_statistics(config: &SimConfig) -> Result<Vec<Result<f64>>> {
    let model = config.validate()?;
    asymptotic_constants(config.family)?;
    with_threads(config.threads, || {
        (0..config.replicates as u64)
            .into_par_iter()
            .map(|i| {
                let sample = replicate_sample(&model, config.n, config.seed, i)?;
                lrt_statistic(&sample, config.family, &config.fit)
            })
            .collect()
    })
}

/// One `(configuration, level)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub family: FamilyKind,
    pub rate: f64,
    pub shape: f64,
    pub p: f64,
    pub n: usize,
    pub level: f64,
    pub critical_value: f64,
    pub rejections: usize,
    /// Replicates with a usable statistic.
    pub replicates: usize,
    pub failures: usize,
    pub rejection_rate: f64,
    pub std_error: f64,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTable {
    pub rows: Vec<SimRow>,
}

impl SimTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| domain(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| domain(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| domain(e.to_string()))
    }

    /// The row for `level`, if present.
    pub fn row(&self, level: f64) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.level == level)
    }
}

/// Tabulates rejection rates from precomputed statistics.
pub fn tabulate(config: &SimConfig, stats: &[Result<f64>], critical: &[f64]) -> SimTable {
    let ok: Vec<f64> = stats.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let used = ok.len();
    let rows = config
        .levels
        .iter()
        .zip(critical)
        .map(|(&level, &c)| {
            let rejections = ok.iter().filter(|&&r| r > c).count();
            let rate = if used == 0 { 0.0 } else { rejections as f64 / used as f64 };
            SimRow {
                family: config.family,
                rate: config.truth.0,
                shape: config.truth.1,
                p: config.truth.2,
                n: config.n,
                level,
                critical_value: c,
                rejections,
                replicates: used,
                failures: stats.len() - used,
                rejection_rate: rate,
                std_error: if used == 0 { 0.0 } else { (rate * (1.0 - rate) / used as f64).sqrt() },
                seed: config.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
            }
        })
        .collect();
    SimTable { rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    Type1,
    Power,
}

/// Runs a size or power study, returning the table and the statistics of
/// the successful replicates in replicate order.
pub fn run_study(config: &SimConfig, mode: StudyMode) -> Result<(SimTable, Vec<f64>)> {
    let a0 = config
        .family
        .c0_shape()
        .ok_or_else(|| domain(format!("{} has no homogeneity point", config.family)))?;
    match mode {
        StudyMode::Type1 if config.truth.1 != a0 => {
            return Err(domain(format!("type-I study needs α = α₀, got α = {}", config.truth.1)))
        }
        StudyMode::Power if config.truth.1 == a0 => return Err(domain("power study needs α ≠ α₀")),
        _ => {}
    }
    config.validate()?;
    let critical = config.critical_values()?;
    let stats = replicate_statistics(config)?;
    let table = tabulate(config, &stats, &critical);
    Ok((table, stats.into_iter().filter_map(|r| r.ok()).collect()))
}

/// Empirical size: the truth must sit at the homogeneity point `α = α₀`.
pub fn type1_table(config: &SimConfig) -> Result<SimTable> {
    run_study(config, StudyMode::Type1).map(|r| r.0)
}

/// Empirical power: the truth must be off the homogeneity point.
pub fn power_table(config: &SimConfig) -> Result<SimTable> {
    run_study(config, StudyMode::Power).map(|r| r.0)
}

/// Sorted statistics paired with limit quantiles at probabilities
/// `(i - ½)/R`.
pub fn qq_pairs(stats: &[f64], family: FamilyKind, null_draws: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    let dist = sample_null_limit(&asymptotic_constants(family)?, null_draws, seed);
    let mut sorted = stats.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let r = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, dist.quantile((i as f64 + 0.5) / r)))
        .collect())
}

/// Q–Q pairs for the replicate statistics of `config`; failed replicates are
/// dropped.
pub fn qq_data(config: &SimConfig) -> Result<Vec<(f64, f64)>> {
    let stats: Vec<f64> = replicate_statistics(config)?.into_iter().filter_map(|r| r.ok()).collect();
    qq_pairs(&stats, config.family, config.null_draws, config.seed)
}

/// Two-column CSV `empirical,limit`.
pub fn qq_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("empirical,limit\n");
    for (a, b) in pairs {
        out.push_str(&format!("{a},{b}\n"));
    }
    out
}
