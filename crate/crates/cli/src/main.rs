//! `sidescan` command-line driver.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sidescan::imageio::OverlayKind;
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "sidescan", version, about = "Training-free object detection for sidescan sonar XTF data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect objects and write a georeferenced catalog.
    Detect(DetectArgs),
    /// Generate a synthetic survey with a ground-truth sidecar.
    Synth(SynthArgs),
    /// Summarize an XTF file or stream.
    Info(InfoArgs),
    /// Write corrected, equalized waterfall tiles and optional overlays.
    Waterfall(WaterfallArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PipelineOpts {
    /// Pipeline config (TOML).
    #[arg(long, env = "SIDESCAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Channels to process, e.g. `port,starboard` or `all`.
    #[arg(long)]
    pub channels: Option<String>,
    /// Skip histogram equalization.
    #[arg(long)]
    pub no_equalize: bool,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Geojson,
    Csv,
    Both,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// XTF file, or `-` for stdin.
    #[arg(required_unless_present_any = ["live", "dump_config"], conflicts_with = "live")]
    pub input: Option<String>,
    /// Read the XTF stream from a TCP endpoint and print objects as JSON lines.
    #[arg(long, value_name = "HOST:PORT", env = "SIDESCAN_LIVE")]
    pub live: Option<String>,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    /// Output directory for the catalog.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    pub format: OutputFormat,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scenario file (TOML); the built-in 10-target survey when omitted.
    #[arg(long, env = "SIDESCAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print the effective scenario as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    /// XTF file, or `-` for stdin.
    pub input: String,
}

#[derive(Args, Debug)]
pub struct WaterfallArgs {
    /// XTF file, or `-` for stdin.
    #[arg(required_unless_present = "dump_config")]
    pub input: Option<String>,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value = "none", value_parser = parse_overlay)]
    pub overlay: OverlayKind,
}

fn parse_overlay(s: &str) -> Result<OverlayKind, String> {
    s.parse()
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Output could not be written, or anything else unexpected.
    Other(anyhow::Error),
    /// Input unreadable or not XTF.
    Input(anyhow::Error),
    Config(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Input(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Other(e) | Failure::Input(e) | Failure::Config(e) => e,
        }
    }
}

fn init_logging() {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Synth(a) => commands::synth(a),
        Command::Info(a) => commands::info(a),
        Command::Waterfall(a) => commands::waterfall(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            tracing::error!(exit_code = f.code(), "{:#}", f.error());
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
