//! Command-line front end for the weighted compositional mortality
//! pipeline: ingestion, transform inspection, fitting, weight selection,
//! forecasting, prediction intervals, backtesting, annuity pricing, and
//! report formatting. Every run writes a resolved config and a manifest
//! beside its outputs; identical configs and seeds give byte-identical
//! outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Criterion, RunConfig};
use wcoda_core::error::CodaError;
use wcoda_core::lifetable::{Sex, TableFormat};
use wcoda_core::wfpca::ScoreBasis;

/// Distinct exit codes per error class: 2 parse, 3 domain, 4 input/output.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Domain(String),
    Io(String),
    Other(String),
}

impl CliError {
    pub fn parse(msg: impl Into<String>) -> Self {
        CliError::Parse(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        CliError::Domain(msg.into())
    }

    pub fn io(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }

    pub fn other(msg: impl Into<String>) -> Self {
        CliError::Other(msg.into())
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Domain(_) => "domain",
            CliError::Io(_) => "io",
            CliError::Other(_) => "internal",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Domain(m) | CliError::Io(m) | CliError::Other(m) => m,
        }
    }
}

impl From<CodaError> for CliError {
    fn from(err: CodaError) -> Self {
        match err {
            CodaError::Parse { .. } => CliError::Parse(err.to_string()),
            CodaError::Structure(_) | CodaError::Domain(_) => CliError::Domain(err.to_string()),
            CodaError::Io(e) => CliError::Io(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wcoda",
    version,
    about = "Weighted compositional modeling and forecasting of life-table death counts"
)]
struct Cli {
    /// Worker threads (numerical results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML config file; explicit flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FormatArg {
    HmdDeaths,
    HmdQx,
    Csv,
}

impl From<FormatArg> for TableFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::HmdDeaths => TableFormat::HmdDeaths,
            FormatArg::HmdQx => TableFormat::HmdQx,
            FormatArg::Csv => TableFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum BasisArg {
    Unweighted,
    Weighted,
}

impl From<BasisArg> for ScoreBasis {
    fn from(arg: BasisArg) -> Self {
        match arg {
            BasisArg::Unweighted => ScoreBasis::Unweighted,
            BasisArg::Weighted => ScoreBasis::Weighted,
        }
    }
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// Input table (canonical CSV, long qx CSV, or wide mortality text)
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Column to read from wide inputs: female, male, or total
    #[arg(long)]
    sex: Option<String>,
    #[arg(long)]
    radix: Option<f64>,
    /// Geometric decay parameter of the observation weights
    #[arg(long)]
    kappa: Option<f64>,
    /// Per-horizon decay parameters from a `horizon,kappa` file
    #[arg(long)]
    kappa_file: Option<PathBuf>,
    /// Search grid lo:hi:step (defaults to 0:0.3:0.001)
    #[arg(long)]
    kappa_grid: Option<String>,
    /// Retained components
    #[arg(long)]
    k: Option<usize>,
    /// Choose the component count by the eigenvalue-ratio criterion
    #[arg(long)]
    evr: bool,
    #[arg(long)]
    max_k: Option<usize>,
    #[arg(long, value_enum)]
    score_basis: Option<BasisArg>,
    #[arg(long)]
    horizons: Option<usize>,
    /// Significance level(s), e.g. --nu 0.2,0.05
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    /// Bootstrap replicates
    #[arg(long = "B", alias = "replicates")]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Backtest split train_end:validation_end:test_end
    #[arg(long)]
    plan: Option<String>,
    /// Anchor the expanding training window at this year
    #[arg(long)]
    fit_start: Option<i32>,
    #[arg(long, value_enum)]
    criterion: Option<Criterion>,
    /// Quoted ages lo:hi:step
    #[arg(long)]
    ages: Option<String>,
    /// Quoted maturities lo:hi:step
    #[arg(long)]
    maturities: Option<String>,
    /// Annual interest rate, continuously compounded
    #[arg(long)]
    rate: Option<f64>,
    /// Skip closing forecast curves to the radix
    #[arg(long)]
    no_closure: bool,
    /// Output directory
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a mortality table, derive death counts, and summarize it
    Ingest(Opts),
    /// Emit the log-ratio transform (mean curve and centered values)
    Transform(Opts),
    /// Fit the weighted decomposition and emit its parts
    Fit(Opts),
    /// Select the decay parameter per horizon on the validation segment
    SelectKappa(Opts),
    /// Point forecasts of death counts
    Forecast(Opts),
    /// Bootstrap prediction intervals
    Intervals(Opts),
    /// Expanding-window backtest over the test segment
    Backtest(Opts),
    /// Survival-based annuity price tables
    Annuity(Opts),
    /// Format a backtest run as tables (values scaled by 100)
    Report(ReportOpts),
    /// Generate a bundled synthetic surface
    Synth(SynthOpts),
}

#[derive(Args, Debug)]
struct ReportOpts {
    /// Output directory of a previous backtest run
    #[arg(long)]
    run: PathBuf,
    /// Report square roots of the Jensen-Shannon columns
    #[arg(long)]
    sqrt: bool,
    /// Also write long-format plot data beside the report
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args, Debug)]
struct SynthOpts {
    /// stationary, regime-change, or gaussian
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 60)]
    years: usize,
    #[arg(long, default_value_t = 1961)]
    start_year: i32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Years after the structural change (regime-change only)
    #[arg(long, default_value_t = 18)]
    recent: usize,
    /// Output CSV file
    #[arg(long, short = 'o')]
    out: PathBuf,
}

impl Opts {
    /// Folds the flags over the loaded (or default) config.
    fn merge_into(self, mut config: RunConfig) -> RunConfig {
        if self.input.is_some() {
            config.input = self.input;
        }
        if let Some(format) = self.format {
            config.format = format.into();
        }
        if let Some(sex) = self.sex {
            if let Ok(parsed) = sex.parse::<Sex>() {
                config.sex = parsed;
            }
        }
        if let Some(radix) = self.radix {
            config.radix = radix;
        }
        if let Some(kappa) = self.kappa {
            config.kappa = kappa;
        }
        if self.kappa_grid.is_some() {
            config.kappa_grid = self.kappa_grid;
        }
        if let Some(k) = self.k {
            config.k = k;
        }
        if self.evr {
            config.evr = true;
        }
        if self.max_k.is_some() {
            config.max_k = self.max_k;
        }
        if let Some(basis) = self.score_basis {
            config.score_basis = basis.into();
        }
        if let Some(horizons) = self.horizons {
            config.horizons = horizons;
        }
        if let Some(nu) = self.nu {
            config.nu = nu;
        }
        if let Some(replicates) = self.replicates {
            config.replicates = replicates;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.plan.is_some() {
            config.plan = self.plan;
        }
        if self.fit_start.is_some() {
            config.fit_start = self.fit_start;
        }
        if let Some(criterion) = self.criterion {
            config.criterion = criterion;
        }
        if let Some(ages) = self.ages {
            config.ages = ages;
        }
        if let Some(maturities) = self.maturities {
            config.maturities = maturities;
        }
        if let Some(rate) = self.rate {
            config.rate = rate;
        }
        if self.no_closure {
            config.no_closure = true;
        }
        if self.out.is_some() {
            config.out = self.out;
        }
        config
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::other(format!("thread pool: {e}")))?;
    }
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Ingest(opts) => commands::ingest(opts.merge_into(base)),
        Command::Transform(opts) => commands::transform(opts.merge_into(base)),
        Command::Fit(opts) => commands::fit(opts.merge_into(base)),
        Command::SelectKappa(opts) => commands::select_kappa(opts.merge_into(base)),
        Command::Forecast(opts) => {
            let kappa_file = opts.kappa_file.clone();
            commands::forecast(opts.merge_into(base), kappa_file)
        }
        Command::Intervals(opts) => commands::intervals(opts.merge_into(base)),
        Command::Backtest(opts) => {
            let kappa_file = opts.kappa_file.clone();
            commands::backtest(opts.merge_into(base), kappa_file)
        }
        Command::Annuity(opts) => commands::annuity(opts.merge_into(base)),
        Command::Report(opts) => commands::report(&opts.run, opts.sqrt, opts.plot_data),
        Command::Synth(opts) => commands::synth(&opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": {
                        "kind": err.kind(),
                        "exit": err.exit_code(),
                        "message": err.message(),
                    }
                })
            );
            ExitCode::from(err.exit_code())
        }
    }
}
