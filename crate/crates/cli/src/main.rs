//! `aloha`: analytic results, stability checks, power optimization and
//! Monte Carlo runs for multi-class slotted-Aloha networks.

mod commands;
mod output;
mod presets;
mod sweep;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aloha_core::{Error, NetworkConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{Format, Output};

#[derive(Debug, Parser)]
#[command(name = "aloha", version, about = "Stability, delay and power analysis of multi-class slotted-Aloha networks")]
struct Cli {
    /// JSON network configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output files. Tables go to stdout when omitted.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Base seed for simulation runs.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationary success probability, delay, load and channel share per class.
    Analyze {
        /// Analyze only this class, with every other class saturated.
        #[arg(long, value_name = "INDEX")]
        saturated_others: Option<usize>,
    },
    /// Stability verdict for the configured arrival rates and powers.
    Stability {
        #[arg(long, value_enum, default_value_t = StabilityMethodArg::Region)]
        method: StabilityMethodArg,
    },
    /// Power allocation minimizing the weighted sum of delays.
    Optimize {
        /// Comma-separated positive weights, one per class (default: all 1).
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Also run the numeric optimizer and report the deviation.
        #[arg(long)]
        verify: bool,
    },
    /// Largest D2D arrival rate meeting both delay caps.
    MaxRate {
        #[arg(long, default_value_t = 0)]
        d2d: usize,
        #[arg(long, default_value_t = 1)]
        cell: usize,
        /// Delay cap of the D2D class, in slots.
        #[arg(long)]
        d1_max: f64,
        /// Delay cap of the cellular class, in slots.
        #[arg(long)]
        d2_max: f64,
    },
    /// Monte Carlo run; writes trajectory.csv and summary.json.
    Simulate(SimulateArgs),
    /// Analytic metrics over a grid of one parameter.
    Sweep {
        /// `alpha` or `classes[i].<field>`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Comma-separated metrics.
        #[arg(long, value_delimiter = ',', default_value = "stable,success_prob,mean_delay")]
        outputs: Vec<String>,
    },
    /// Data behind one of the bundled experiments.
    Preset(presets::PresetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StabilityMethodArg {
    /// Closed-form region inequality.
    Region,
    /// Search over saturated-class removal orders.
    Permutation,
    /// Whether any power vector stabilizes the arrivals; ignores the configured powers.
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Spatial,
    MeanField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FadingArg {
    Marginalized,
    Sampled,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    pub slots: u64,
    /// Links of the densest class; others scale with density.
    #[arg(long, default_value_t = 400)]
    pub links: usize,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    /// Fraction of slots discarded before measuring.
    #[arg(long, default_value_t = 0.2)]
    pub warmup: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Spatial)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = FadingArg::Marginalized)]
    pub fading: FadingArg,
    /// Every source always transmits with its access probability.
    #[arg(long)]
    pub saturated: bool,
    #[arg(long, default_value_t = 200)]
    pub trajectory_points: usize,
    /// Bin the attempts of `--bin-class` by link distance into this many bins.
    #[arg(long)]
    pub distance_bins: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub bin_class: usize,
    /// Per-source queue length at which the run aborts as unstable.
    #[arg(long, default_value_t = 1 << 22)]
    pub max_queue: usize,
    /// Add analytic values and relative errors to the per-class table.
    #[arg(long)]
    pub compare_analytic: bool,
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Unstable,
    Infeasible,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.as_ref().to_path_buf();
        move |source| CliError::Io { path, source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::Unstable { .. } | Error::SingleClassUnstable { .. } | Error::QueueOverflow { .. } => 2,
                Error::Infeasible { .. } | Error::ChannelSaturated { .. } | Error::ContentionSaturated { .. } => 3,
                _ => 1,
            },
            CliError::Usage(_) | CliError::Io { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub output: Output,
}

impl Context {
    pub fn load_config(&self) -> Result<NetworkConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        NetworkConfig::from_json_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

fn run(cli: Cli) -> Result<Status, CliError> {
    let ctx = Context {
        config: cli.config,
        seed: cli.seed,
        output: Output {
            format: cli.format,
            dir: cli.out,
        },
    };
    match cli.command {
        Command::Analyze { saturated_others } => commands::analyze(&ctx, saturated_others),
        Command::Stability { method } => commands::stability(&ctx, method),
        Command::Optimize { weights, verify } => commands::optimize(&ctx, weights, verify),
        Command::MaxRate { d2d, cell, d1_max, d2_max } => commands::max_rate(&ctx, d2d, cell, d1_max, d2_max),
        Command::Simulate(args) => commands::simulate(&ctx, &args),
        Command::Sweep { param, grid, outputs } => sweep::run(&ctx, &param, &grid, &outputs),
        Command::Preset(args) => presets::run(&ctx, &args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap reports its own failures with 2, which here means "unstable"
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Unstable) => ExitCode::from(2),
        Ok(Status::Infeasible) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
