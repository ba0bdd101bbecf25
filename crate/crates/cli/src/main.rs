//! `interrupted`: simulate, summarize, fit and check interrupted point
//! processes from the command line.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "interrupted", version, about = "Interrupted spatial point processes: simulation, summaries, fitting")]
struct Cli {
    /// Worker threads for replicate-parallel work (default: all cores).
    #[arg(long, global = true, env = "INTERRUPTED_WORKERS")]
    workers: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate Y, X and X̄ from a model config.
    Simulate(SimulateArgs),
    /// Estimate a summary function of a pattern.
    Summary(SummaryArgs),
    /// Fit a model family to data.
    Fit(FitArgs),
    /// Pointwise simulation envelopes under a fitted model.
    Envelope(EnvelopeArgs),
    /// Conditional simulation of a chi2 selection field given X and X̄.
    Condsim(CondsimArgs),
    /// Simulation study over the four reference models.
    Study(StudyArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Model config (JSON with base, selection and optional dim, window, seed).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed (default 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the realized Π on an R×R raster (pi.csv, pi.pgm).
    #[arg(long, value_name = "R")]
    pub pi_grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SummaryArgs {
    /// Pattern CSV with header x,y[,z].
    #[arg(long)]
    pub data: PathBuf,
    /// Window bounds x0,x1,y0,y1[,z0,z1].
    #[arg(long, default_value = "0,1,0,1")]
    pub window: String,
    /// pcf, K, F, G or J.
    #[arg(long, default_value = "K")]
    pub stat: String,
    /// Largest distance (default: a quarter of the smallest side).
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Number of distances in [0, rmax].
    #[arg(long, default_value_t = 101)]
    pub nr: usize,
    /// Kernel half-width for pcf (default 0.15/ρ̂^{1/d}).
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Output CSV (r,value); a JSON copy is written alongside.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Retained points X.
    #[arg(long)]
    pub data: PathBuf,
    /// All points Y (for CL); the deleted points are Y minus X.
    #[arg(long, conflicts_with = "deleted")]
    pub baseline: Option<PathBuf>,
    /// Deleted points X̄ (for CL).
    #[arg(long)]
    pub deleted: Option<PathBuf>,
    /// Family JSON, or a model whose family is used.
    #[arg(long)]
    pub model: PathBuf,
    /// cl, g, K or avg.
    #[arg(long, default_value = "g")]
    pub method: String,
    #[arg(long, default_value = "0,1,0,1")]
    pub window: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bootstrap replicates for avg.
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    /// Pair range for CL2: default (quarter side), unlimited, or a distance.
    #[arg(long, default_value = "default")]
    pub cl2_range: String,
    /// Contrast integration limits and exponent.
    #[arg(long)]
    pub rl: Option<f64>,
    #[arg(long)]
    pub ru: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model (config, fit result with a model, or bare model).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "0,1,0,1")]
    pub window: String,
    #[arg(long, default_value = "K")]
    pub stat: String,
    #[arg(long, default_value_t = 99)]
    pub nsim: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub nr: usize,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Output CSV (r,value,lo,hi).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct CondsimArgs {
    #[arg(long)]
    pub retained: PathBuf,
    #[arg(long)]
    pub deleted: PathBuf,
    /// Fitted chi2 (k = 1) model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "0,1,0,1")]
    pub window: String,
    /// Number of retained MCMC states, one raster each.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Raster resolution per axis.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Burn-in sweeps (default 10 n).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Sweeps between retained states.
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct StudyArgs {
    /// 1: composite likelihood with X and Y observed; 2: minimum contrast on X.
    #[arg(long, default_value_t = 1)]
    pub table: u8,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated subset of the models 1–4.
    #[arg(long, default_value = "1,2,3,4")]
    pub models: String,
    /// Statistics for table 2 (g, K).
    #[arg(long, default_value = "g,K")]
    pub stats: String,
    /// Bootstrap replicates for the averaged estimator.
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    /// Skip the averaged estimator in table 2.
    #[arg(long)]
    pub no_average: bool,
    #[arg(long, default_value = "default")]
    pub cl2_range: String,
    /// Output directory; the Markdown table goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {n} workers: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Summary(a) => commands::summary(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Envelope(a) => commands::envelope(&a),
        Command::Condsim(a) => commands::condsim(&a),
        Command::Study(a) => commands::study(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
