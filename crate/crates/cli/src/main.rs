//! `trisplat`: train, render, export and evaluate triangle splatting scenes.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Environment variable that sets the worker-thread count when `--threads` is absent.
pub const THREADS_ENV: &str = "TRISPLAT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "trisplat", version, about = "Differentiable triangle splatting")]
pub struct Cli {
    /// Overrides the seed from configs and specs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for rendering and gradients.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Reproducible runs. Gradient reduction is already order-fixed, so this
    /// only pins the defaults that would otherwise vary.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a scene from a TOML config.
    Train {
        config: Option<PathBuf>,
        /// Print the default config and exit.
        #[arg(long)]
        print_defaults: bool,
    },
    /// Render a snapshot from a camera spec (TOML or JSON).
    Render {
        snapshot: PathBuf,
        camera: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write depth, normal and alpha images next to the output.
        #[arg(long)]
        all_buffers: bool,
    },
    /// Export a snapshot as a GLB triangle mesh.
    ExportMesh {
        snapshot: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Held-out PSNR/SSIM, and Chamfer distance against a reference mesh.
    Eval {
        snapshot: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        /// Background used to composite dataset images.
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "1,1,1")]
        background: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        downscale: usize,
    },
    /// Compare analytic gradients with finite differences on random scenes.
    Gradcheck {
        /// Number of consecutive seeds, starting at `--seed` (default 0).
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Generate a procedural ground-truth scene and its rendered dataset.
    MakeSynthetic {
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn worker_threads(cli: &Cli) -> anyhow::Result<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a number, got {v:?}"))?)),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> anyhow::Result<ExitCode> {
        if let Some(n) = worker_threads(&cli)? {
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
        }
        commands::dispatch(&cli)
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
