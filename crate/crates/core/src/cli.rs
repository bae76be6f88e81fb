//! Command-line front end. Every subcommand parses flags, calls the library
//! and formats the result: JSON for reports, CSV for tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::data::{impute_jitter, impute_midpoint, load_data, midpoint_analysis, replicate_analysis, AnalysisOptions, DataFile, Format};
use crate::error::{domain, Error, Result};
use crate::families::FamilyKind;
use crate::gof::{gof_test, GofOptions};
use crate::likelihood::{fit_full, DurationSample, FitOptions};
use crate::lrt::{asymptotic_constants, critical_values, critical_values_csv, local_power, lrt_test, LocalPowerOptions, TestOptions, DEFAULT_PVALUE_DRAWS, DEFAULT_TABLE_DRAWS};
use crate::simulate::{qq_csv, qq_pairs, run_study, with_threads, SimConfig, StudyMode};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "FIMIX_THREADS";

#[derive(Parser, Debug)]
#[command(name = "fimix", version, about = "Mixture forward/incubation-time model: fitting, homogeneity test, calibration and simulation")]
pub struct Cli {
    /// Maximum worker threads; results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Maximum-likelihood fit of the mixture model.
    Fit(DataArgs),
    /// Likelihood-ratio test of exponential homogeneity.
    Test {
        #[command(flatten)]
        data: DataArgs,
        /// Limit-law draws behind the p-value.
        #[arg(long, default_value_t = DEFAULT_PVALUE_DRAWS)]
        mc_draws: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.10, 0.05, 0.01])]
        levels: Vec<f64>,
    },
    /// Chi-square goodness of fit of the fitted model.
    Gof {
        #[command(flatten)]
        data: DataArgs,
        /// Interval edges, starting at 0 and ending with `inf`.
        #[arg(long, value_delimiter = ',')]
        edges: Option<Vec<f64>>,
        /// Quadrature panels per unit of ln t.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Critical values of the limiting null distribution, as CSV.
    Nulldist {
        #[arg(long, value_parser = parse_family, default_value = "weibull")]
        family: FamilyKind,
        #[arg(long, value_delimiter = ',', default_values_t = [0.10, 0.05, 0.01])]
        levels: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TABLE_DRAWS)]
        mc_draws: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Asymptotic power under local alternatives.
    Power {
        #[arg(long, value_parser = parse_family, default_value = "weibull")]
        family: FamilyKind,
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long)]
        p0: f64,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        #[arg(long, default_value_t = 200_000)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_PVALUE_DRAWS)]
        mc_draws: usize,
        #[arg(long, default_value_t = 1e-3)]
        grid_step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte Carlo size or power study.
    Simulate {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, value_parser = parse_family, default_value = "weibull")]
        family: FamilyKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        reps: usize,
        /// Data-generating `λ,α,p`.
        #[arg(long, value_parser = parse_truth)]
        truth: (f64, f64, f64),
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.10, 0.05, 0.01])]
        levels: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_PVALUE_DRAWS)]
        mc_draws: usize,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        /// Also write Q–Q pairs against the limit law to this file.
        #[arg(long)]
        qq_out: Option<PathBuf>,
    },
    /// Midpoint and repeated jitter analysis of day counts.
    Analyze {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, value_parser = parse_family, default_value = "weibull")]
        family: FamilyKind,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PVALUE_DRAWS)]
        mc_draws: usize,
    },
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Day counts (`day,count`) or raw durations (`time`), CSV or JSON.
    #[arg(long)]
    pub data: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    #[arg(long, value_parser = parse_family, default_value = "weibull")]
    pub family: FamilyKind,
    /// How day counts become durations.
    #[arg(long, value_enum)]
    pub impute: Option<Impute>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Cells of the profile grid over p.
    #[arg(long, default_value_t = 50)]
    pub grid_size: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Impute {
    Jitter,
    Midpoint,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Type1,
    Power,
}

fn parse_family(s: &str) -> std::result::Result<FamilyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_truth(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(format!("expected three values λ,α,p, got {}", v.len())),
    }
}

fn input_format(path: &Path, f: Option<InputFormat>) -> Format {
    match f {
        Some(InputFormat::Csv) => Format::Csv,
        Some(InputFormat::Json) => Format::Json,
        None => Format::from_path(path),
    }
}

impl DataArgs {
    fn sample(&self) -> Result<DurationSample> {
        match (load_data(&self.data, input_format(&self.data, self.format))?, self.impute) {
            (DataFile::Durations(s), None) => Ok(s),
            (DataFile::Durations(_), Some(_)) => Err(domain("--impute applies to day counts, not raw durations")),
            (DataFile::Counts(c), Some(Impute::Jitter)) => impute_jitter(&c, self.seed),
            (DataFile::Counts(c), Some(Impute::Midpoint)) => impute_midpoint(&c),
            (DataFile::Counts(_), None) => Err(domain("day counts need --impute jitter|midpoint")),
        }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            grid_size: self.grid_size,
            ..FitOptions::default()
        }
    }
}

/// Adds `version` and `seed` to a serialized report.
fn stamped(report: &impl Serialize, seed: u64) -> Result<String> {
    let mut v = serde_json::to_value(report).map_err(|e| domain(e.to_string()))?;
    if let Value::Object(m) = &mut v {
        m.insert("version".into(), json!(VERSION));
        m.insert("seed".into(), json!(seed));
    }
    Ok(serde_json::to_string_pretty(&v).expect("json values serialize") + "\n")
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::DegenerateLikelihood { .. } => "degenerate_likelihood",
        Error::EmptySample => "empty_sample",
        Error::Unsupported(_) => "unsupported",
        Error::Convergence(_) => "convergence",
        Error::Quadrature { .. } => "quadrature",
        Error::SampleTooSmall { .. } => "sample_too_small",
        Error::Parse { .. } => "parse",
        Error::NegativeStatistic(_) => "negative_statistic",
        Error::Io(_) => "io",
    }
}

fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Fit(d) => stamped(&fit_full(&d.sample()?, d.family, &d.fit_options())?, d.seed),
        Command::Test { data, mc_draws, levels } => {
            let opts = TestOptions {
                fit: FitOptions {
                    keep_trace: false,
                    ..data.fit_options()
                },
                mc_draws: *mc_draws,
                mc_seed: data.seed,
                levels: levels.clone(),
            };
            stamped(&lrt_test(&data.sample()?, data.family, &opts)?, data.seed)
        }
        Command::Gof { data, edges, resolution } => {
            let sample = data.sample()?;
            let fit = fit_full(&sample, data.family, &FitOptions {
                keep_trace: false,
                ..data.fit_options()
            })?;
            let opts = GofOptions {
                resolution: *resolution,
                ..GofOptions::default()
            };
            let report = gof_test(&sample, &fit.model()?, edges.as_deref(), &opts)?;
            stamped(&json!({ "gof": report, "fit": fit }), data.seed)
        }
        Command::Nulldist { family, levels, mc_draws, seed } => {
            let c = asymptotic_constants(*family)?;
            critical_values_csv(&critical_values(*family, &c, levels, *mc_draws, *seed)?)
        }
        Command::Power { family, delta, p0, level, draws, mc_draws, grid_step, seed } => {
            let c = asymptotic_constants(*family)?;
            let opts = LocalPowerOptions {
                draws: *draws,
                null_draws: *mc_draws,
                grid_step: *grid_step,
                seed: *seed,
            };
            let power = local_power(*delta, *p0, &c, *level, &opts)?;
            let report = json!({
                "family": family, "delta": delta, "p0": p0, "level": level,
                "power": power, "draws": draws, "mc_draws": mc_draws, "grid_step": grid_step,
            });
            stamped(&report, *seed)
        }
        Command::Simulate { mode, family, n, reps, truth, seed, levels, mc_draws, format, qq_out } => {
            let mut config = SimConfig::new(*family, *truth, *n, *reps, *seed);
            config.levels = levels.clone();
            config.null_draws = *mc_draws;
            let mode = match mode {
                Mode::Type1 => StudyMode::Type1,
                Mode::Power => StudyMode::Power,
            };
            let (table, stats) = run_study(&config, mode)?;
            if let Some(path) = qq_out {
                std::fs::write(path, qq_csv(&qq_pairs(&stats, *family, *mc_draws, *seed)?))?;
            }
            match format {
                TableFormat::Csv => table.to_csv(),
                TableFormat::Json => stamped(&table, *seed),
            }
        }
        Command::Analyze { data, format, family, reps, seed, mc_draws } => {
            let counts = match load_data(data, input_format(data, *format))? {
                DataFile::Counts(c) => c,
                DataFile::Durations(_) => return Err(domain("analyze expects day counts")),
            };
            let opts = AnalysisOptions {
                mc_draws: *mc_draws,
                ..AnalysisOptions::default()
            };
            let midpoint = midpoint_analysis(&counts, *family, *seed, &opts)?;
            let jitter = replicate_analysis(&counts, *family, *reps, *seed, &opts)?;
            stamped(&json!({ "midpoint": midpoint, "jitter": jitter }), *seed)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code: 0 on success, 1 on computation errors (JSON diagnostic on `err`),
/// 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = with_threads(cli.threads, || execute(&cli.command)).and_then(|r| r);
    match result {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => 0,
            Err(e) => report(err, &Error::Io(e)),
        },
        Err(e) => report(err, &e),
    }
}

fn report(err: &mut dyn Write, e: &Error) -> i32 {
    let diag = json!({ "error": error_kind(e), "message": e.to_string(), "version": VERSION });
    let _ = writeln!(err, "{diag}");
    1
}
