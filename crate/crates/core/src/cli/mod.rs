//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 bad input, 3 evaluation over
//! an empty validity mask.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::EngineConfig;
use crate::error::Error;
use crate::updater::Mode;

pub use manifest::{InputPaths, IterationRecord, OutputFormat, RunManifest, WeightSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_EMPTY_EVAL: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SCALESTEREO_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "scalestereo", version, about = "Depth-initialized recurrent stereo matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate disparity for one or more rectified pairs.
    Infer(InferArgs),
    /// Score a disparity map against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic layered scene with exact ground truth.
    Synth(SynthArgs),
    /// Affine-align a relative depth map to ground truth and report EPE and ratio STD.
    DepthAnalyze(DepthAnalyzeArgs),
    /// Rerun an inference from its manifest.
    Replay(ReplayArgs),
}

/// Engine settings. Flags override values from `--config`, which override
/// the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// TOML file with engine settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Total update iterations [default: 32].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Leading scale-update iterations [default: 8].
    #[arg(long)]
    pub su_iters: Option<usize>,
    /// Pyramid lookup radius [default: 4].
    #[arg(long)]
    pub radius: Option<usize>,
    /// Correlation pyramid levels [default: 2].
    #[arg(long)]
    pub levels: Option<usize>,
    /// Initialization gain [default: 0.5].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Disparity floor [default: 0.05].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Comma-separated scale factors [default: 0.125,0.25,0.5,0.75,1,1.25,1.5,2].
    #[arg(long, value_delimiter = ',')]
    pub scale_factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// Left image (PNG). Repeat together with --right for several pairs.
    #[arg(long, required = true)]
    pub left: Vec<PathBuf>,
    /// Right image (PNG).
    #[arg(long, required = true)]
    pub right: Vec<PathBuf>,
    /// Relative inverse depth (PFM or 16-bit PNG), full or quarter resolution.
    /// Without it the initialization is the constant floor.
    #[arg(long)]
    pub depth: Vec<PathBuf>,
    /// Ground truth for the per-iteration EPE series.
    #[arg(long)]
    pub gt: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Learned)]
    pub mode: Mode,
    /// Weight bundle; when absent, weights are generated from --seed.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "scalestereo-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Both)]
    pub format: OutputFormat,
    /// Also write every iteration's full-resolution map.
    #[arg(long)]
    pub save_iters: bool,
    /// Worker threads for processing pairs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted disparity (PFM or 16-bit PNG).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth; its invalid pixels are excluded.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub thresholds: Vec<f64>,
    /// Print JSON instead of key=value lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, env = OUT_DIR_ENV, default_value = "scalestereo-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 8)]
    pub background_disparity: u32,
    /// Foreground layer `x0,y0,x1,y1,disparity` in full-resolution pixels.
    #[arg(long, value_parser = parse_layer)]
    pub layer: Vec<[usize; 5]>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Depth perturbation region `x0,y0,x1,y1,scale` in quarter-resolution
    /// pixels. Regions must tile the map; none means scale 1 everywhere.
    #[arg(long, value_parser = parse_region)]
    pub depth_region: Vec<(usize, usize, usize, usize, f64)>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub depth_shift: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DepthAnalyzeArgs {
    /// Relative inverse depth (PFM or 16-bit PNG), full or quarter resolution.
    #[arg(long)]
    pub depth: PathBuf,
    /// Full-resolution ground-truth disparity.
    #[arg(long)]
    pub gt: PathBuf,
    /// Row label; defaults to the depth file stem.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "scalestereo-out")]
    pub out: PathBuf,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<&str>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated values, got `{s}`"));
    }
    Ok(parts)
}

fn parse_layer(s: &str) -> Result<[usize; 5], String> {
    let mut out = [0usize; 5];
    for (slot, p) in out.iter_mut().zip(parse_numbers(s, 5)?) {
        *slot = p.parse().map_err(|e| format!("`{p}`: {e}"))?;
    }
    Ok(out)
}

fn parse_region(s: &str) -> Result<(usize, usize, usize, usize, f64), String> {
    let p = parse_numbers(s, 5)?;
    let int = |v: &str| v.parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let scale = p[4].parse::<f64>().map_err(|e| format!("`{}`: {e}", p[4]))?;
    Ok((int(p[0])?, int(p[1])?, int(p[2])?, int(p[3])?, scale))
}

/// Failure carrying its exit code and a message naming the failing stage.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    pub fn bad_input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_BAD_INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

/// Exit code for an engine error raised while handling user input.
pub fn input_error_code(e: &Error) -> i32 {
    match e {
        Error::EmptyMask => EXIT_EMPTY_EVAL,
        Error::Phase { .. } => EXIT_INTERNAL,
        _ => EXIT_BAD_INPUT,
    }
}

pub(crate) trait Stage<T> {
    /// Input-side failure: classified by error kind.
    fn stage(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

pub(crate) trait OutputStage<T> {
    /// Output-side failure: always internal.
    fn output(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T, E: Into<Error>> Stage<T> for Result<T, E> {
    fn stage(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| {
            let e = e.into();
            CliError {
                code: input_error_code(&e),
                message: format!("{}: {e}", what()),
            }
        })
    }
}

impl<T, E: fmt::Display> OutputStage<T> for Result<T, E> {
    fn output(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::internal(format!("{}: {e}", what())))
    }
}

impl EngineArgs {
    /// Defaults, then the config file, then explicit flags.
    pub fn resolve(&self) -> Result<EngineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).stage(|| format!("reading config `{}`", path.display()))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::bad_input(format!("parsing config `{}`: {e}", path.display())))?
            }
            None => EngineConfig::default(),
        };
        if let Some(v) = self.iters {
            cfg.total_iters = v;
        }
        if let Some(v) = self.su_iters {
            cfg.su_iters = v;
        }
        if let Some(v) = self.radius {
            cfg.lookup.radius = v;
        }
        if let Some(v) = self.levels {
            cfg.lookup.num_levels = v;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = &self.scale_factors {
            cfg.lookup.scale_factors = v.clone();
        }
        cfg.validate().stage(|| "engine configuration".to_string())?;
        Ok(cfg)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Synth(a) => commands::synth(a),
        Command::DepthAnalyze(a) => commands::depth_analyze(a),
        Command::Replay(a) => commands::replay(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
