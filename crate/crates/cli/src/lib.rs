//! Command-line front end: argument parsing, subcommand dispatch and error reporting.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod render;
pub mod runlog;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use radsynth_core::metrics::IouMode;
use radsynth_core::Error;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config overlay (optional `"preset": "desk" | "full"`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "radsynth", version, about = "LiDAR-to-radar tensor synthesis toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a toy paired dataset (LPC1 clouds, RDT1 tensors, box files, manifest).
    GenScenes,
    /// Voxelize a point cloud at the LiDAR resolution; writes voxel centers as LPC1.
    Voxelize {
        #[arg(long)]
        input: PathBuf,
    },
    /// Append object-information points (box edges and Gaussian shells) to a point cloud.
    Obis {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        boxes: PathBuf,
    },
    /// Build an object bank from the training split and insert objects into every training frame.
    Gtaug {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train the generator (and discriminator) on a manifest's pairs.
    Train {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Synthesize a radar tensor (RDT1, log-normalized) from a checkpoint and a point cloud.
    Synth {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Box annotations used for the object supplement when it is enabled.
        #[arg(long)]
        boxes: Option<PathBuf>,
    },
    /// Keep the top k% of radar cells as an LPC1 point cloud.
    Sparsify {
        #[arg(long)]
        input: PathBuf,
        /// Percentage of cells to keep (default: metrics.sparsify_percent).
        #[arg(long)]
        k: Option<f64>,
        /// Reference power used to undo log normalization of synthesized tensors.
        #[arg(long, default_value_t = 1e13)]
        v_ref: f64,
    },
    /// Image (PSNR/SSIM) or detection (AP) metrics.
    Metrics {
        #[command(subcommand)]
        mode: MetricsMode,
    },
    /// Render a radar tensor's BEV map as a jet-colored PPM image.
    Bev {
        #[arg(long)]
        input: PathBuf,
    },
    /// Voxel-quantization center-shift study.
    CenterShift {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.4")]
        resolutions: Vec<f64>,
    },
    /// Finite-difference gradient checks of every op and of the joint model objective.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum MetricsMode {
    /// BEV PSNR and SSIM between a predicted and a reference tensor.
    Image {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
    },
    /// Average precision of detections against ground-truth boxes (JSON lines).
    Ap {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// IoU threshold (default: metrics.ap_iou).
        #[arg(long)]
        iou: Option<f64>,
        #[arg(long, value_enum, default_value_t = IouKind::Bev)]
        iou_mode: IouKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum IouKind {
    Bev,
    #[value(name = "3d")]
    ThreeD,
}

impl From<IouKind> for IouMode {
    fn from(k: IouKind) -> Self {
        match k {
            IouKind::Bev => IouMode::Bev,
            IouKind::ThreeD => IouMode::ThreeD,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    /// A check ran to completion but did not meet its threshold.
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Usage(_) => 2,
            CliError::Core(_) | CliError::CheckFailed(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_validation() => "validation",
            CliError::Core(Error::Io { .. }) => "io",
            CliError::Core(_) => "internal",
            CliError::Usage(_) => "usage",
            CliError::CheckFailed(_) => "check_failed",
        }
    }

    pub fn report(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }
}

/// Parses `args`, runs the subcommand, prints its JSON result to stdout (or the error report to
/// stderr) and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.report());
            return err.exit_code();
        }
    };
    match commands::dispatch(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
