//! Command-line front end: reads delimited data, runs the test or a
//! simulation sweep, and prints a JSON report or an aligned table.

pub mod config;
pub mod data;
pub mod report;
pub mod table;

use std::path::{Path, PathBuf};

use citest_core::bootstrap::{DEFAULT_BOOTSTRAP, DEFAULT_SEED};
use citest_core::simulate::{self, BandwidthPair, DgpName, DgpSpec, SimSettings, PRESET_NAMES};
use citest_core::stats::Functional;
use citest_core::transform::{Bandwidth, Kernel, Sample, ZKind};
use citest_core::weights::BetaFamily;
use citest_core::{run_test, TestConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use thiserror::Error;

use config::{default_theta, parse_theta, RunConfig, SimConfig, ThetaMode, ZKindName};
use data::{parse_table, DataError};
use report::{ReportDocument, Run};

pub const SEED_ENV: &str = "CITEST_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Data { path: String, source: DataError },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] citest_core::Error),
    #[error("invalid report: {0}")]
    Report(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "citest",
    version,
    about = "Distribution-free test of conditional independence"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether Y and Z are independent given a single index of X.
    Test(TestArgs),
    /// Monte Carlo rejection rates on the built-in designs.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BetaArg {
    Exp,
    Ind,
}

impl From<BetaArg> for BetaFamily {
    fn from(b: BetaArg) -> Self {
        match b {
            BetaArg::Exp => BetaFamily::Exponential,
            BetaArg::Ind => BetaFamily::Indicator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionalArg {
    Ks2,
    Cm2,
    Ks1,
    Cm1,
}

impl From<FunctionalArg> for Functional {
    fn from(f: FunctionalArg) -> Self {
        match f {
            FunctionalArg::Ks2 => Functional::Ks2,
            FunctionalArg::Cm2 => Functional::Cm2,
            FunctionalArg::Ks1 => Functional::Ks1,
            FunctionalArg::Cm1 => Functional::Cm1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZKindArg {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateArg {
    Probit,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Delimited text file with a header row (comma or tab).
    #[arg(long, required_unless_present = "replay")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    pub y: String,
    #[arg(long, default_value = "z")]
    pub z: String,
    /// Covariate column; repeat for several. Defaults to every other column.
    #[arg(long)]
    pub x: Vec<String>,
    #[arg(long, value_enum, default_value = "continuous")]
    pub z_kind: ZKindArg,
    #[arg(long, value_enum, default_value = "exp")]
    pub beta: BetaArg,
    #[arg(long, value_enum, default_value = "ks2")]
    pub functional: FunctionalArg,
    /// Bandwidth constant for Z_hat (or the propensities when Z is discrete).
    #[arg(long, default_value_t = 1.0)]
    pub h_const: f64,
    /// Bandwidth constant for Y_hat; defaults to --h-const.
    #[arg(long)]
    pub h_const2: Option<f64>,
    /// Bandwidths are c * n^(-exponent).
    #[arg(long, default_value_t = Bandwidth::DEFAULT_EXPONENT)]
    pub h_exponent: f64,
    /// Grid points per axis (default 10, or 20 for discrete Z).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Index coefficients "intercept,slope1,...".
    #[arg(long, conflicts_with = "estimate_theta")]
    pub theta: Option<String>,
    #[arg(long, value_enum)]
    pub estimate_theta: Option<EstimateArg>,
    /// Re-run the configuration echoed in a previous JSON report.
    #[arg(long, conflicts_with_all = ["data", "x", "theta", "estimate_theta"])]
    pub replay: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Layout of one of the published tables.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES), conflicts_with = "design")]
    pub preset: Option<String>,
    /// Design name (A1, A2, B1-B4, C, D1, D2); repeat for several.
    #[arg(long, value_parser = parse_design)]
    pub design: Vec<DgpName>,
    /// Dependence parameter of the continuous designs; repeatable.
    #[arg(long, default_values_t = [0.2])]
    pub a: Vec<f64>,
    /// Deviation size of D1 and D2; repeatable.
    #[arg(long, default_values_t = [0.5])]
    pub kappa: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
    pub bootstrap: usize,
    /// Weight families to run; defaults to the preset's, or exp.
    #[arg(long, value_enum)]
    pub beta: Vec<BetaArg>,
    #[arg(long, value_enum)]
    pub functional: Vec<FunctionalArg>,
    /// Bandwidth constants for Z_hat / propensities; repeatable.
    #[arg(long)]
    pub h_const: Vec<f64>,
    /// Bandwidth constants for Y_hat, crossed with --h-const; repeatable.
    #[arg(long)]
    pub h_const2: Vec<f64>,
    #[arg(long, default_value_t = Bandwidth::DEFAULT_EXPONENT)]
    pub h_exponent: f64,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Nominal levels; repeatable.
    #[arg(long)]
    pub alpha: Vec<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, conflicts_with_all = ["preset", "design"])]
    pub replay: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

fn parse_design(s: &str) -> Result<DgpName, String> {
    s.parse().map_err(|_| {
        let names: Vec<String> = DgpName::ALL.iter().map(|d| d.to_string()).collect();
        format!("unknown design {s:?}; expected one of {}", names.join(", "))
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn replayed(path: &Path) -> Result<Run, CliError> {
    Ok(ReportDocument::from_json(&read_file(path)?)?.run)
}

pub fn run_config(args: &TestArgs) -> Result<RunConfig, CliError> {
    if let Some(path) = &args.replay {
        return match replayed(path)? {
            Run::Test { config, .. } => Ok(config),
            Run::Simulate { .. } => Err(CliError::Config(format!(
                "{} is a simulation report",
                path.display()
            ))),
        };
    }
    let data = args
        .data
        .as_ref()
        .expect("clap requires --data without --replay");
    let x = if args.x.is_empty() {
        let text = read_file(data)?;
        let table = parse_table(&text).map_err(|source| CliError::Data {
            path: data.display().to_string(),
            source,
        })?;
        table
            .headers
            .into_iter()
            .filter(|h| *h != args.y && *h != args.z)
            .collect()
    } else {
        args.x.clone()
    };
    let theta = match (&args.theta, args.estimate_theta) {
        (Some(t), _) => ThetaMode::Known {
            theta: parse_theta(t)?,
        },
        (None, Some(EstimateArg::Probit)) => ThetaMode::Probit,
        (None, None) => ThetaMode::Known {
            theta: default_theta(x.len()),
        },
    };
    let bw = |c: f64| Bandwidth::new(c, args.h_exponent);
    let config = RunConfig {
        data: data.display().to_string(),
        y: args.y.clone(),
        z: args.z.clone(),
        x,
        z_kind: match args.z_kind {
            ZKindArg::Continuous => ZKindName::Continuous,
            ZKindArg::Discrete => ZKindName::Discrete,
        },
        theta,
        test: TestConfig {
            beta: args.beta.into(),
            functional: args.functional.into(),
            kernel: Kernel::Quartic,
            h_y: bw(args.h_const2.unwrap_or(args.h_const))?,
            h_z: bw(args.h_const)?,
            grid_resolution: args.grid,
            bootstrap: args.bootstrap,
            alpha: args.alpha,
            seed: args.seed,
        },
    };
    config.validate()?;
    Ok(config)
}

pub fn load_sample(config: &RunConfig) -> Result<Sample, CliError> {
    let text = read_file(Path::new(&config.data))?;
    let wrap = |source| CliError::Data {
        path: config.data.clone(),
        source,
    };
    let table = parse_table(&text).map_err(wrap)?;
    let y = table.numeric_column(&config.y).map_err(wrap)?;
    let z = table.numeric_column(&config.z).map_err(wrap)?;
    let mut x = Array2::zeros((y.len(), config.x.len()));
    for (j, name) in config.x.iter().enumerate() {
        let col = table.numeric_column(name).map_err(wrap)?;
        x.column_mut(j).assign(&ndarray::ArrayView1::from(&col));
    }
    let sample = match config.z_kind {
        ZKindName::Continuous => Sample::new(y, z, x, ZKind::Continuous)?,
        ZKindName::Discrete => Sample::discrete(y, z, x)?,
    };
    Ok(sample)
}

pub fn execute_test(config: RunConfig) -> Result<ReportDocument, CliError> {
    config.validate()?;
    let sample = load_sample(&config)?;
    let result = run_test(&sample, &config.index_spec(), &config.test)?;
    Ok(ReportDocument::test(config, result))
}

pub fn sim_config(args: &SimulateArgs) -> Result<SimConfig, CliError> {
    if let Some(path) = &args.replay {
        return match replayed(path)? {
            Run::Simulate { config, .. } => Ok(config),
            Run::Test { .. } => Err(CliError::Config(format!(
                "{} is a test report",
                path.display()
            ))),
        };
    }
    let (designs, mut settings) = match (&args.preset, args.design.is_empty()) {
        (Some(name), _) => simulate::preset(name, args.n)?,
        (None, false) => {
            let mut designs = Vec::new();
            for &d in &args.design {
                if d.is_binary() {
                    if d.uses_kappa() {
                        for &k in &args.kappa {
                            designs.push(DgpSpec::binary(d, Some(k), args.n)?);
                        }
                    } else {
                        designs.push(DgpSpec::binary(d, None, args.n)?);
                    }
                } else {
                    for &a in &args.a {
                        designs.push(DgpSpec::continuous(d, a, args.n)?);
                    }
                }
            }
            let settings = SimSettings {
                bandwidths: vec![BandwidthPair::equal(1.0)],
                exponent: Bandwidth::DEFAULT_EXPONENT,
                betas: vec![BetaFamily::Exponential],
                functionals: vec![Functional::Ks2],
                levels: vec![0.05],
                grid_resolution: None,
                kernel: Kernel::Quartic,
            };
            (designs, settings)
        }
        (None, true) => {
            return Err(CliError::Config(
                "give --preset or at least one --design".into(),
            ))
        }
    };
    if !args.h_const.is_empty() {
        settings.bandwidths = if args.h_const2.is_empty() {
            args.h_const
                .iter()
                .map(|c| BandwidthPair::equal(*c))
                .collect()
        } else {
            args.h_const
                .iter()
                .flat_map(|h1| {
                    args.h_const2
                        .iter()
                        .map(move |h2| BandwidthPair { h_z: *h1, h_y: *h2 })
                })
                .collect()
        };
    } else if !args.h_const2.is_empty() {
        return Err(CliError::Config("--h-const2 needs --h-const".into()));
    }
    if !args.beta.is_empty() {
        settings.betas = args.beta.iter().map(|b| BetaFamily::from(*b)).collect();
    }
    if !args.functional.is_empty() {
        settings.functionals = args
            .functional
            .iter()
            .map(|f| Functional::from(*f))
            .collect();
    }
    if !args.alpha.is_empty() {
        settings.levels = args.alpha.clone();
    }
    settings.exponent = args.h_exponent;
    settings.grid_resolution = args.grid;
    let config = SimConfig {
        preset: args.preset.clone(),
        designs,
        settings,
        reps: args.reps,
        bootstrap: args.bootstrap,
        seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

pub fn execute_simulate(config: SimConfig) -> Result<ReportDocument, CliError> {
    config.validate()?;
    let report = simulate::rejection_table(
        &config.designs,
        &config.settings,
        config.reps,
        config.bootstrap,
        config.seed,
    )?;
    Ok(ReportDocument::simulate(config, report))
}

pub fn render(doc: &ReportDocument, format: Format) -> String {
    match format {
        Format::Json => doc.to_json(),
        Format::Table => {
            let mut out = match &doc.run {
                Run::Test { config, result } => table::render_test(config, result),
                Run::Simulate { report, .. } => table::render_sim(report),
            };
            if matches!(doc.run, Run::Simulate { .. }) {
                for w in &doc.warnings {
                    out.push_str(&format!("warning: {w}\n"));
                }
            }
            out
        }
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Run a parsed command line and return the text to print.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Test(args) => {
            let config = run_config(&args)?;
            let doc = in_pool(args.output.threads, || execute_test(config))??;
            Ok(render(&doc, args.output.format))
        }
        Command::Simulate(args) => {
            let config = sim_config(&args)?;
            let doc = in_pool(args.output.threads, || execute_simulate(config))??;
            Ok(render(&doc, args.output.format))
        }
    }
}
