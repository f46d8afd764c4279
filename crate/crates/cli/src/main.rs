// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ConfigFlag, DetectFlags, LossFlags, NoiseFlags, PatchFlags, PnpFlags, SceneFlags, Settings, SplatFlags};
use error::CliError;

/// Scene-specific landmark localization: synthetic scenes, voting maps,
/// landmark detection and camera pose estimation.
#[derive(Debug, Parser)]
#[command(name = "vsloc", version)]
struct Cli {
    /// Seed for every random choice (scene, patches, noise, RANSAC, training)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel stages; 0 uses every core
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    threads: usize,
    /// Print every embedded default as a config file and exit
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Occlusion block sweep, landmark pipeline against the dense baseline
    Noise,
    /// Patch size sweep
    Patch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mining {
    Knn,
    Uniform,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene: DIR/cloud.ply and DIR/camera_NN.txt
    GenScene {
        /// Output directory (created if missing)
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        scene: SceneFlags,
    },
    /// Over-segment a point cloud into patches and write their centroid landmarks
    GenLandmarks {
        /// Input point cloud (ASCII PLY)
        #[arg(long, value_name = "FILE")]
        cloud: PathBuf,
        /// Output per-point patch labels
        #[arg(long, value_name = "FILE")]
        patches: PathBuf,
        /// Output landmark positions (id x y z, meters)
        #[arg(long, value_name = "FILE")]
        landmarks: PathBuf,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        patch: PatchFlags,
    },
    /// Render ground-truth segmentation and voting maps for one camera (VSM1)
    RenderMaps {
        #[arg(long, value_name = "FILE")]
        cloud: PathBuf,
        #[arg(long, value_name = "FILE")]
        patches: PathBuf,
        #[arg(long, value_name = "FILE")]
        landmarks: PathBuf,
        /// Camera file with intrinsics and pose
        #[arg(long, value_name = "FILE")]
        camera: PathBuf,
        /// Output maps (VSM1)
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        splat: SplatFlags,
    },
    /// Detect landmark image locations from maps by vote intersection
    Detect {
        /// Input maps (VSM1)
        #[arg(long, value_name = "FILE")]
        maps: PathBuf,
        /// Output detections (id u v support residual, pixels)
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        detect: DetectFlags,
    },
    /// Estimate the camera pose from detections and landmark positions
    Localize {
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        landmarks: PathBuf,
        /// Camera file; only the intrinsics are used
        #[arg(long, value_name = "FILE")]
        camera: PathBuf,
        /// Output pose ([R | t] world to camera)
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Camera file holding the true pose; prints the pose error
        #[arg(long, value_name = "FILE")]
        truth: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        pnp: PnpFlags,
    },
    /// Run seeded pipeline trials on a synthetic scene and write a CSV of results
    Simulate {
        /// Trials; trial t uses camera t mod camera_count unless --camera is given
        #[arg(long, default_value_t = 20, value_name = "N")]
        trials: usize,
        /// Use this camera for every trial
        #[arg(long, value_name = "INDEX")]
        camera: Option<usize>,
        /// Also run the dense-correspondence baseline
        #[arg(long)]
        dense: bool,
        /// Dense baseline noise scale; calibrated against the landmark pipeline when omitted
        #[arg(long, value_name = "SCALE")]
        dense_noise_scale: Option<f64>,
        /// Output CSV; stdout when omitted
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        scene: SceneFlags,
        #[command(flatten)]
        patch: PatchFlags,
        #[command(flatten)]
        splat: SplatFlags,
        #[command(flatten)]
        noise: NoiseFlags,
        #[command(flatten)]
        detect: DetectFlags,
        #[command(flatten)]
        pnp: PnpFlags,
    },
    /// Run a noise or patch-size sweep and write the per-trial table
    Sweep {
        #[arg(long, value_enum, default_value_t = Experiment::Noise)]
        experiment: Experiment,
        /// Occlusion block fractions for the noise sweep
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7])]
        fracs: Vec<f64>,
        /// Patch sizes for the patch sweep (meters)
        #[arg(long, value_delimiter = ',', default_values_t = [0.10, 0.15, 0.25, 0.5])]
        sizes: Vec<f64>,
        /// Trials per setting
        #[arg(long, default_value_t = 20, value_name = "N")]
        trials: usize,
        /// Skip the dense baseline in the noise sweep
        #[arg(long)]
        no_dense: bool,
        /// Dense baseline noise scale; calibrated when omitted
        #[arg(long, value_name = "SCALE")]
        dense_noise_scale: Option<f64>,
        /// Output CSV of every trial
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Optional whitespace-separated plot data of the per-setting medians
        #[arg(long, value_name = "FILE")]
        plot: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        scene: SceneFlags,
        #[command(flatten)]
        patch: PatchFlags,
        #[command(flatten)]
        splat: SplatFlags,
        #[command(flatten)]
        noise: NoiseFlags,
        #[command(flatten)]
        detect: DetectFlags,
        #[command(flatten)]
        pnp: PnpFlags,
    },
    /// Print the FLOP and memory cost of cross entropy against the prototype triplet loss
    BenchLoss {
        /// Output height H (pixels)
        #[arg(long, default_value_t = 640)]
        height: u64,
        /// Output width W (pixels)
        #[arg(long, default_value_t = 480)]
        width: u64,
        /// Landmark classes C
        #[arg(long, default_value_t = 5000)]
        classes: u64,
        /// Embedding dimension D
        #[arg(long, default_value_t = 12)]
        dim: u64,
        /// Active labels per image A
        #[arg(long, default_value_t = 100)]
        active: u64,
    },
    /// Compare analytic loss gradients with central finite differences
    Losscheck {
        /// Random instances
        #[arg(long, default_value_t = 50)]
        instances: usize,
        /// Largest map side (pixels)
        #[arg(long, default_value_t = 16)]
        max_side: usize,
        /// Labels per instance
        #[arg(long, default_value_t = 20)]
        labels: u32,
        /// Embedding dimension
        #[arg(long, default_value_t = 16)]
        dim: usize,
        /// Maximum accepted relative error
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Fit free embeddings and prototypes to a rendered toy label map; writes VSP1
    FitToy {
        /// Map side (pixels)
        #[arg(long, default_value_t = 64)]
        side: u32,
        /// Patch size of the toy scene (meters)
        #[arg(long, default_value_t = 0.3)]
        toy_patch_size: f64,
        /// Gradient steps
        #[arg(long, default_value_t = 300)]
        steps: usize,
        /// Learning rate
        #[arg(long, default_value_t = 0.2)]
        lr: f64,
        /// Negative mining strategy
        #[arg(long, value_enum, default_value_t = Mining::Knn)]
        mining: Mining,
        /// Output prototypes (VSP1)
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Optional per-step accuracy trace (CSV)
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlag,
        #[command(flatten)]
        loss: LossFlags,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.print_defaults {
        print!("{}", Settings::default().describe());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no subcommand given; see --help".into()));
    };
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    commands::dispatch(command, cli.seed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vsloc: {}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
