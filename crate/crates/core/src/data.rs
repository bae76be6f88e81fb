//! Integer-day duration counts and their conversion to continuous samples.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::families::FamilyKind;
use crate::likelihood::{DurationSample, FitOptions, FitResult, Provenance};
use crate::lrt::{asymptotic_constants, lrt_fits, sample_null_limit, DEFAULT_PVALUE_DRAWS};
use crate::rng::{stream, Domain};

/// Frequencies of whole-day durations, sorted by day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationCounts {
    entries: Vec<(u64, u64)>,
}

impl DurationCounts {
    /// Validates and sorts `(day, count)` pairs. Days must be distinct and
    /// counts positive.
    pub fn new(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (day, count) in pairs {
            if count == 0 {
                return Err(domain(format!("day {day} has a zero count")));
            }
            if map.insert(day, count).is_some() {
                return Err(domain(format!("day {day} appears twice")));
            }
        }
        if map.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(DurationCounts {
            entries: map.into_iter().collect(),
        })
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn n(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` files are JSON; everything else is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(domain(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_counts(path: &Path, format: Format) -> Result<DurationCounts> {
    let text = std::fs::read_to_string(path)?;
    parse_counts(&text, format)
}

/// Parses counts from text. CSV errors carry the file line; JSON validation
/// errors carry the 1-based array entry in place of a line.
pub fn parse_counts(text: &str, format: Format) -> Result<DurationCounts> {
    let rows = match format {
        Format::Csv => parse_csv(text)?,
        Format::Json => parse_json(text)?,
    };
    let mut seen = BTreeMap::new();
    for &(line, day, count) in &rows {
        if let Some(first) = seen.insert(day, line) {
            return Err(Error::Parse {
                line,
                msg: format!("day {day} duplicates line {first}"),
            });
        }
        if count == 0 {
            return Err(Error::Parse {
                line,
                msg: "count must be positive".into(),
            });
        }
    }
    DurationCounts::new(rows.into_iter().map(|(_, d, c)| (d, c)))
}

fn parse_csv(text: &str) -> Result<Vec<(usize, u64, u64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ["day", "count"] {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `day,count`".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize, name: &str| -> Result<u64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<u64>().map_err(|_| Error::Parse {
                line,
                msg: format!("{name} must be a non-negative integer, got {raw:?}"),
            })
        };
        rows.push((line, field(0, "day")?, field(1, "count")?));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct JsonRow {
    day: i64,
    count: i64,
}

fn parse_json(text: &str) -> Result<Vec<(usize, u64, u64)>> {
    let rows: Vec<JsonRow> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let bad = |msg: &str| Error::Parse {
                line: i + 1,
                msg: format!("entry {}: {msg}", i + 1),
            };
            let day = u64::try_from(r.day).map_err(|_| bad("day must be non-negative"))?;
            let count = u64::try_from(r.count).map_err(|_| bad("count must be non-negative"))?;
            Ok((i + 1, day, count))
        })
        .collect()
}

/// Contents of a data file: day counts or raw durations.
#[derive(Clone, Debug, PartialEq)]
pub enum DataFile {
    Counts(DurationCounts),
    Durations(DurationSample),
}

/// Loads a data file, telling counts from raw durations by the CSV header
/// (`day,count` or `time`) or, for JSON, by the entries (objects or numbers).
pub fn load_data(path: &Path, format: Format) -> Result<DataFile> {
    let text = std::fs::read_to_string(path)?;
    parse_data(&text, format)
}

pub fn parse_data(text: &str, format: Format) -> Result<DataFile> {
    let raw = match format {
        Format::Csv => text.lines().next().map(str::trim) == Some("time"),
        Format::Json => text.trim_start().trim_start_matches('[').trim_start().starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '.'),
    };
    if !raw {
        return parse_counts(text, format).map(DataFile::Counts);
    }
    let times: Vec<f64> = match format {
        Format::Csv => text
            .lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("not a number: {l:?}"),
                })
            })
            .collect::<Result<_>>()?,
        Format::Json => serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?,
    };
    DurationSample::raw(times).map(DataFile::Durations)
}

/// Replaces each day `i` by independent `U(i, i + 1)` draws. The draw for
/// the `j`-th case on day `i` depends only on `(seed, i, j)`.
pub fn impute_jitter(counts: &DurationCounts, seed: u64) -> Result<DurationSample> {
    let mut times = Vec::with_capacity(counts.n() as usize);
    for &(day, count) in counts.entries() {
        let mut rng = stream(seed, Domain::Jitter, day);
        for _ in 0..count {
            let u: f64 = rng.sample(rand_distr::Open01);
            times.push(day as f64 + u);
        }
    }
    DurationSample::new(times, Provenance::Jitter, Some(seed))
}

/// Replaces each day `i` by `i + 0.5`.
pub fn impute_midpoint(counts: &DurationCounts) -> Result<DurationSample> {
    let times = counts
        .entries()
        .iter()
        .flat_map(|&(day, count)| std::iter::repeat_n(day as f64 + 0.5, count as usize))
        .collect();
    DurationSample::new(times, Provenance::Midpoint, None)
}

/// Fit and test outcome for one imputed dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub seed: Option<u64>,
    pub rate: f64,
    pub shape: f64,
    pub p: f64,
    pub loglik: f64,
    pub r_n: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateError {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSummary {
    pub family: FamilyKind,
    pub n: u64,
    pub reps: usize,
    pub seed: u64,
    pub mc_draws: usize,
    /// Means over successful replicates of `(λ̂, α̂, p̂)`.
    pub mean_rate: f64,
    pub mean_shape: f64,
    pub mean_p: f64,
    pub min_r_n: f64,
    pub max_r_n: f64,
    pub replicates: Vec<ReplicateOutcome>,
    pub errors: Vec<ReplicateError>,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub fit: FitOptions,
    pub mc_draws: usize,
    pub threads: Option<usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            fit: FitOptions {
                keep_trace: false,
                ..FitOptions::default()
            },
            mc_draws: DEFAULT_PVALUE_DRAWS,
            threads: None,
        }
    }
}

fn outcome(index: usize, sample: &DurationSample, family: FamilyKind, fit: &FitOptions, p_value: &dyn Fn(f64) -> f64) -> Result<(ReplicateOutcome, FitResult)> {
    let (r_n, full, _) = lrt_fits(sample, family, fit)?;
    Ok((
        ReplicateOutcome {
            index,
            seed: sample.seed(),
            rate: full.rate,
            shape: full.shape,
            p: full.p,
            loglik: full.loglik,
            r_n,
            p_value: p_value(r_n),
        },
        full,
    ))
}

/// Fits and tests the midpoint-imputed data.
pub fn midpoint_analysis(counts: &DurationCounts, family: FamilyKind, seed: u64, opts: &AnalysisOptions) -> Result<ReplicateOutcome> {
    let dist = sample_null_limit(&asymptotic_constants(family)?, opts.mc_draws, seed);
    let sample = impute_midpoint(counts)?;
    outcome(0, &sample, family, &opts.fit, &|r| dist.p_value(r)).map(|o| o.0)
}

/// Repeats jitter imputation, fitting and testing `reps` times. Replicate
/// `r` imputes with a seed drawn from stream `(seed, r)`; failures are
/// recorded and skipped.
pub fn replicate_analysis(counts: &DurationCounts, family: FamilyKind, reps: usize, seed: u64, opts: &AnalysisOptions) -> Result<ReplicateSummary> {
    if reps == 0 {
        return Err(domain("need at least one replicate"));
    }
    let dist = sample_null_limit(&asymptotic_constants(family)?, opts.mc_draws, seed);
    let results: Vec<std::result::Result<ReplicateOutcome, ReplicateError>> = crate::simulate::with_threads(opts.threads, || {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let rep_seed = stream(seed, Domain::Replicate, r as u64).next_u64();
                impute_jitter(counts, rep_seed)
                    .and_then(|s| outcome(r, &s, family, &opts.fit, &|x| dist.p_value(x)))
                    .map(|o| o.0)
                    .map_err(|e| ReplicateError {
                        index: r,
                        seed: rep_seed,
                        error: e.to_string(),
                    })
            })
            .collect()
    })?;
    let (ok, errors): (Vec<_>, Vec<_>) = results.into_iter().partition(|r| r.is_ok());
    let replicates: Vec<ReplicateOutcome> = ok.into_iter().map(|r| r.unwrap()).collect();
    let errors = errors.into_iter().map(|r| r.unwrap_err()).collect();
    let m = replicates.len().max(1) as f64;
    let mean = |f: fn(&ReplicateOutcome) -> f64| replicates.iter().map(f).sum::<f64>() / m;
    let r_ns = replicates.iter().map(|r| r.r_n);
    Ok(ReplicateSummary {
        family,
        n: counts.n(),
        reps,
        seed,
        mc_draws: opts.mc_draws,
        mean_rate: mean(|r| r.rate),
        mean_shape: mean(|r| r.shape),
        mean_p: mean(|r| r.p),
        min_r_n: r_ns.clone().fold(f64::INFINITY, f64::min),
        max_r_n: r_ns.fold(f64::NEG_INFINITY, f64::max),
        replicates,
        errors,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}
