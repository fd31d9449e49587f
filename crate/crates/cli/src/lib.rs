//! `lowlight`: batch dataset synthesis, SLIC inspection, loss reports and
//! quality metrics.
//!
//! Exit codes are 0 on success, 1 when any input or record failed, and 2 for
//! argument errors.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use lowlight_core::metrics::{Metric, DEFAULT_LOE_GRID};
use lowlight_core::synthesis::{Mode, DEFAULT_MAX_DEPTH, DEFAULT_SPLIT_PROB};
use lowlight_core::SlicParams;

pub mod commands;
pub mod config;
pub mod inputs;

/// Error caused by how the tool was invoked rather than by the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(
    name = "lowlight",
    version,
    about = "Low-light dataset synthesis and quality evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Darken images region by region and write training quartets.
    Synth(SynthArgs),
    /// Compute LOE, NIQE or BRISQUE features over images.
    Eval(EvalArgs),
    /// Segment one image and write labels, overlay and region statistics.
    Slic(SlicArgs),
    /// Report the training loss functionals for an image pair.
    Losses(LossesArgs),
    /// Fit a NIQE pristine model from a set of clean images.
    FitNiqe(FitNiqeArgs),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Input PNG file or directory; repeatable.
    #[arg(long = "input", short = 'i')]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = positive, default_value_t = default_workers())]
    pub workers: usize,
    /// `key = value` file supplying defaults for any long flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SlicOptions {
    #[arg(long, default_value_t = SlicParams::default().k)]
    pub k: usize,
    #[arg(long, default_value_t = SlicParams::default().compactness)]
    pub compactness: f64,
    #[arg(long, default_value_t = SlicParams::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = SlicParams::default().min_region_frac)]
    pub min_region_frac: f64,
}

impl SlicOptions {
    pub fn params(&self) -> SlicParams {
        SlicParams {
            k: self.k,
            compactness: self.compactness,
            max_iters: self.max_iters,
            min_region_frac: self.min_region_frac,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: lowlight_core::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: lowlight_core::Error| e.to_string())
}

fn parse_patch(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 16 => Ok(n),
        Ok(_) => Err("patch size must be at least 16".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// superpixel, quadtree or global.
    #[arg(long, value_parser = parse_mode, default_value = "superpixel")]
    pub mode: Mode,
    #[command(flatten)]
    pub slic: SlicOptions,
    #[arg(long, value_parser = parse_patch, default_value_t = 240)]
    pub patch: usize,
    /// Random patches cut from each image; 0 keeps the whole frame.
    #[arg(long, default_value_t = 0)]
    pub patches_per_image: usize,
    /// Force every region to this level (0.1, 0.2, ..., 1.0).
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub max_depth: u32,
    #[arg(long, default_value_t = DEFAULT_SPLIT_PROB)]
    pub split_prob: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// loe, niqe or brisque-features; repeatable. Defaults to niqe.
    #[arg(long = "metric", value_parser = parse_metric)]
    pub metrics: Vec<Metric>,
    /// Reference images for LOE, matched to `--enhanced` by relative path.
    #[arg(long)]
    pub original: Option<PathBuf>,
    #[arg(long)]
    pub enhanced: Option<PathBuf>,
    /// Pristine model file; the bundled model is used otherwise.
    #[arg(long)]
    pub niqe_model: Option<PathBuf>,
    #[arg(long, value_parser = positive, default_value_t = DEFAULT_LOE_GRID)]
    pub loe_grid: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SlicArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub slic: SlicOptions,
}

#[derive(Debug, Clone, Args)]
pub struct LossesArgs {
    /// Exactly two images: the target, then the network output.
    #[command(flatten)]
    pub common: CommonArgs,
    /// Feature map (PFM, channels as planes) of the first image.
    #[arg(long)]
    pub features_a: Option<PathBuf>,
    #[arg(long)]
    pub features_b: Option<PathBuf>,
    #[arg(long)]
    pub lambda_attention: Option<f64>,
    #[arg(long)]
    pub lambda_van_perceptual: Option<f64>,
    #[arg(long)]
    pub lambda_reconstruction: Option<f64>,
    #[arg(long)]
    pub lambda_en_perceptual: Option<f64>,
    #[arg(long)]
    pub lambda_tv: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitNiqeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Extra `#` provenance line for the model header; repeatable.
    #[arg(long)]
    pub note: Vec<String>,
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Slic(a) => &a.common,
            Command::Losses(a) => &a.common,
            Command::FitNiqe(a) => &a.common,
        }
    }
}

/// Parses `argv`, folding in `--config` values for flags not given directly.
pub fn parse_args(argv: Vec<OsString>) -> anyhow::Result<Cli> {
    let root = Cli::command();
    let matches = root.clone().try_get_matches_from(&argv)?;
    let cli = Cli::from_arg_matches(&matches)?;
    let Some(config) = cli.command.common().config.clone() else {
        return Ok(cli);
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub = root
        .find_subcommand(name)
        .expect("matched subcommand exists");
    let merged = config::merge_args(&argv, sub, sub_matches, &config)?;
    Ok(Cli::try_parse_from(merged)?)
}

pub fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Slic(a) => commands::slic(&a),
        Command::Losses(a) => commands::losses(&a),
        Command::FitNiqe(a) => commands::fit_niqe(&a),
    }
}

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<UsageError>()
            || c.is::<clap::Error>()
            || matches!(
                c.downcast_ref::<lowlight_core::Error>(),
                Some(lowlight_core::Error::Argument(_))
            )
    })
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args(argv: Vec<OsString>) -> ExitCode {
    let cli = match parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if let Some(clap_err) = e.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                return ExitCode::from(clap_err.exit_code() as u8);
            }
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::PartialFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { 2 } else { 1 })
        }
    }
}
