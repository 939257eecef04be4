use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use matrecon::config::Config;
use matrecon::{pipeline, Error};

/// Environment variable overriding the worker count.
const WORKERS_ENV: &str = "MATRECON_WORKERS";

#[derive(Parser)]
#[command(name = "matrecon", version, about = "Differentiable path tracing and PBR material reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline config file (TOML).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output].dir`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (also MATRECON_WORKERS); defaults to all cores.
    #[arg(short, long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Render orbit frames, masks and optional intrinsics.
    Render,
    /// Emit normal and shading guides per frame.
    Guides,
    /// Optimize a material field against a frame set.
    Reconstruct,
    /// Bake a checkpoint into texture maps.
    Bake,
    /// Relight a material under several probes and report PSNR.
    Relight,
    /// PSNR between two frame directories.
    Metrics,
    /// Reproject one view along the camera trajectory.
    Warp,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Invalid(_) | Error::ShapeMismatch(_) => 2,
        Error::Divergence { .. } => 4,
        Error::Io { .. }
        | Error::Image { .. }
        | Error::Parse { .. }
        | Error::IndexOutOfBounds { .. }
        | Error::MissingUvs
        | Error::UnsupportedFormat { .. }
        | Error::ZeroEnergyProbe => 3,
    }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v:?} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = workers(cli.workers)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = Config::load(path)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match cli.command {
        Command::Render => pipeline::run_render(&cfg, &out),
        Command::Guides => pipeline::run_guides(&cfg, &out),
        Command::Reconstruct => pipeline::run_reconstruct(&cfg, &out).map(|_| ()),
        Command::Bake => pipeline::run_bake(&cfg, &out),
        Command::Relight => pipeline::run_relight(&cfg, &out),
        Command::Metrics => pipeline::run_metrics(&cfg, &out),
        Command::Warp => pipeline::run_warp(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
