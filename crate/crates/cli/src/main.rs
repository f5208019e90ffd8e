use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod failure;

/// Interference detection from calibrated received power and C/N0.
#[derive(Debug, Parser)]
#[command(name = "gnss-rfi", version)]
pub struct Cli {
    /// Tool config (TOML). Defaults to $GNSS_RFI_CONFIG_DIR/gnss-rfi.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for randomised stages.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,

    /// Require --seed for randomised stages and fail on schema violations.
    #[arg(long, global = true)]
    pub strict: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate canonical JSONL streams into a metric CSV.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Weight table to aggregate spectra with.
        #[arg(long, default_value = "gps_l1ca")]
        signal: String,
    },
    /// Fit the nominal model to a metric CSV.
    FitNominal {
        input: PathBuf,
        /// Centre of the elevation bin, degrees. All elevations when absent.
        #[arg(long)]
        elevation: Option<f64>,
        #[arg(long, default_value_t = gnss_rfi::nominal::DEFAULT_ELEVATION_WIDTH_DEG)]
        elevation_width: f64,
        /// Restrict to these satellites (repeatable).
        #[arg(long = "sat")]
        sats: Vec<String>,
        /// Local nominal data to shift the fitted model onto.
        #[arg(long)]
        recenter: Option<PathBuf>,
    },
    /// Search the smallest threshold ellipse meeting the target false-positive rate.
    OptimizeThreshold {
        #[arg(long)]
        model: PathBuf,
        /// Optimizer report path. Defaults to the --out path with extension report.toml.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        target_fpr: Option<f64>,
        #[arg(long)]
        rollouts: Option<usize>,
        #[arg(long)]
        proposal_scale: Option<f64>,
        /// Test raw samples instead of their grid-cell centres.
        #[arg(long)]
        no_quantize: bool,
    },
    /// Label every point of a metric CSV.
    Classify {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        regions: PathBuf,
    },
    /// Render a scenario script into a JSONL stream plus truth labels.
    Simulate {
        scenario: PathBuf,
        /// Truth CSV path. Defaults to the --out path with extension truth.csv.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the rendered points as a metric CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Score classified points against truth labels.
    Evaluate {
        #[arg(long)]
        classified: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Scoring window NAME:T0:T1, half-open (repeatable). Whole stream when absent.
        #[arg(long = "window")]
        windows: Vec<String>,
        #[arg(long, value_enum, default_value_t = Positive::Rfi)]
        positive: Positive,
    },
    /// Per-cell density grid for external plotting.
    PlotData {
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        regions: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Positive {
    /// Jamming, spoofing and jamming-induced signal loss.
    Rfi,
    Spoofing,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .parse_default_env()
        .init();

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
