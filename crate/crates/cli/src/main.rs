//! `morphcloud`: command-line driver for 3D face-morph generation and
//! evaluation.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 pipeline failure.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morphcloud::pipeline::StageError;

#[derive(Parser, Debug)]
#[command(name = "morphcloud", version, about = "3D face-morph point clouds: generation, hole filling, quality, vulnerability and detection")]
pub struct Cli {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Morph two subjects: normalize, morph, fill holes, clip.
    Morph(commands::MorphArgs),
    /// Fill occlusion holes of a cloud already in the canonical frame.
    Holefill(commands::HolefillArgs),
    /// Clip a cloud to a fraction of its enclosing sphere.
    Cleanup(commands::CleanupArgs),
    /// Eigen-feature and LAB color entropy scores of a cloud.
    Quality(commands::QualityArgs),
    /// Built-in 16-dimensional detection features for a list of clouds.
    Features(commands::FeaturesArgs),
    /// MMPMR and FMMPMR of morphs against a face recognizer.
    Vuln(commands::VulnArgs),
    /// Train the linear SVM morph detector.
    MadTrain(commands::MadTrainArgs),
    /// Evaluate a trained detector.
    MadEval(commands::MadEvalArgs),
}

/// Where a command writes its JSON manifest.
#[derive(Args, Debug, Clone)]
pub struct ManifestArgs {
    /// Manifest path (defaults to the main output with `.manifest.json`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// A failed command: message plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn pipeline(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        let code = if e.source.is_input_error() { 2 } else { 3 };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MORPHCLOUD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::input(format!("MORPHCLOUD_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::input(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = init_threads()
        .and_then(|()| config::Config::load(cli.config.as_deref()))
        .and_then(|cfg| commands::run(cli.command, cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
