use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use vsloc::detect::DetectParams;
use vsloc::io::{load_text, KeyValues};
use vsloc::landmark::{DEFAULT_SPLAT_RADIUS, ROOM_PATCH_SIZE};
use vsloc::pnp::PnPParams;
use vsloc::sim::{NoiseSpec, SceneShape, SceneSpec};
use vsloc::triplet::{TripletConfig, DEFAULT_DIM};

use crate::error::CliError;

/// Every tunable value, resolved from defaults, then a config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scene: SceneSpec,
    pub patch_size: f64,
    pub splat_radius: u32,
    pub noise: NoiseSpec,
    pub detect: DetectParams,
    pub pnp: PnPParams,
    pub triplet: TripletConfig,
    pub dim: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            patch_size: ROOM_PATCH_SIZE,
            splat_radius: DEFAULT_SPLAT_RADIUS,
            noise: NoiseSpec::default(),
            detect: DetectParams::default(),
            pnp: PnPParams::default(),
            triplet: TripletConfig::default(),
            dim: DEFAULT_DIM,
        }
    }
}

/// Config keys with their meaning and units.
pub const KEYS: &[(&str, &str)] = &[
    ("shape", "scene shape: box-room, planar-wall or random-blobs"),
    ("extent", "scene side length, meters"),
    ("point_density", "surface samples per square meter"),
    ("camera_count", "number of cameras"),
    ("patch_size", "target patch size, meters"),
    ("splat_radius", "point splat radius, pixels"),
    ("label_flip_prob", "probability of flipping a foreground label"),
    ("vote_angle_sigma", "vote rotation noise, degrees"),
    (
        "occlusion_block_frac",
        "occlusion block side as a fraction of image width and height",
    ),
    ("min_patch_px", "size filter T_s, pixels"),
    ("detect_ransac_iters", "vote-intersection RANSAC rounds"),
    ("inlier_cos_thresh", "vote inlier cosine threshold"),
    ("em_radius", "EM vote radius r, pixels"),
    ("em_iters", "EM iterations"),
    ("min_support", "minimum supporting votes T_v"),
    (
        "min_inlier_frac",
        "minimum inlier fraction among votes within em_radius",
    ),
    ("reproj_thresh", "PnP inlier reprojection threshold, pixels"),
    ("pnp_ransac_iters", "PnP RANSAC rounds"),
    ("min_inliers", "minimum PnP inliers"),
    ("refine_iters", "Gauss-Newton iterations"),
    ("margin", "triplet margin m"),
    ("knn_k", "kNN negatives per class k"),
    ("lambda", "voting loss weight"),
    ("dim", "embedding dimension D"),
];

macro_rules! load {
    ($kv:expr, $($key:literal => $field:expr),* $(,)?) => {
        $( if let Some(v) = $kv.get($key)? { $field = v; } )*
    };
}

impl Settings {
    /// Applies the keys present in `kv`; unknown keys are rejected.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<(), CliError> {
        let allowed: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
        kv.check_keys(&allowed)?;
        if let Some(shape) = kv.get_raw("shape") {
            self.scene.shape = shape
                .parse::<SceneShape>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        load!(kv,
            "extent" => self.scene.extent,
            "point_density" => self.scene.point_density,
            "camera_count" => self.scene.camera_count,
            "patch_size" => self.patch_size,
            "splat_radius" => self.splat_radius,
            "label_flip_prob" => self.noise.label_flip_prob,
            "vote_angle_sigma" => self.noise.vote_angle_sigma,
            "occlusion_block_frac" => self.noise.occlusion_block_frac,
            "min_patch_px" => self.detect.min_patch_px,
            "detect_ransac_iters" => self.detect.ransac_iters,
            "inlier_cos_thresh" => self.detect.inlier_cos_thresh,
            "em_radius" => self.detect.em_radius,
            "em_iters" => self.detect.em_iters,
            "min_support" => self.detect.min_support,
            "min_inlier_frac" => self.detect.min_inlier_frac,
            "reproj_thresh" => self.pnp.reproj_thresh,
            "pnp_ransac_iters" => self.pnp.ransac_iters,
            "min_inliers" => self.pnp.min_inliers,
            "refine_iters" => self.pnp.refine_iters,
            "margin" => self.triplet.margin,
            "knn_k" => self.triplet.knn_k,
            "lambda" => self.triplet.lambda,
            "dim" => self.dim,
        );
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scene.validate()?;
        self.noise.validate()?;
        self.detect.validate().map_err(CliError::Usage)?;
        self.pnp.validate().map_err(CliError::Usage)?;
        self.triplet.validate()?;
        if !(self.patch_size > 0.0 && self.patch_size.is_finite()) {
            return Err(CliError::Usage(format!(
                "patch_size {} must be positive",
                self.patch_size
            )));
        }
        if self.splat_radius == 0 {
            return Err(CliError::Usage("splat_radius must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(CliError::Usage("dim must be positive".into()));
        }
        Ok(())
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "shape" => self.scene.shape.to_string(),
            "extent" => self.scene.extent.to_string(),
            "point_density" => self.scene.point_density.to_string(),
            "camera_count" => self.scene.camera_count.to_string(),
            "patch_size" => self.patch_size.to_string(),
            "splat_radius" => self.splat_radius.to_string(),
            "label_flip_prob" => self.noise.label_flip_prob.to_string(),
            "vote_angle_sigma" => self.noise.vote_angle_sigma.to_string(),
            "occlusion_block_frac" => self.noise.occlusion_block_frac.to_string(),
            "min_patch_px" => self.detect.min_patch_px.to_string(),
            "detect_ransac_iters" => self.detect.ransac_iters.to_string(),
            "inlier_cos_thresh" => self.detect.inlier_cos_thresh.to_string(),
            "em_radius" => self.detect.em_radius.to_string(),
            "em_iters" => self.detect.em_iters.to_string(),
            "min_support" => self.detect.min_support.to_string(),
            "min_inlier_frac" => self.detect.min_inlier_frac.to_string(),
            "reproj_thresh" => self.pnp.reproj_thresh.to_string(),
            "pnp_ransac_iters" => self.pnp.ransac_iters.to_string(),
            "min_inliers" => self.pnp.min_inliers.to_string(),
            "refine_iters" => self.pnp.refine_iters.to_string(),
            "margin" => self.triplet.margin.to_string(),
            "knn_k" => self.triplet.knn_k.to_string(),
            "lambda" => self.triplet.lambda.to_string(),
            "dim" => self.dim.to_string(),
            other => unreachable!("unlisted key {other}"),
        }
    }

    /// All values as a commented config file that `--config` accepts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            let _ = writeln!(out, "# {doc}\n{key} = {}", self.value_of(key));
        }
        out
    }
}

#[derive(Debug, Args, Default)]
pub struct ConfigFlag {
    /// Parameter file of `key = value` lines (see --print-defaults); flags override it
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct SceneFlags {
    /// Scene shape: box-room, planar-wall or random-blobs
    #[arg(long)]
    pub shape: Option<String>,
    /// Scene side length (meters)
    #[arg(long, value_name = "M")]
    pub extent: Option<f64>,
    /// Surface samples per square meter
    #[arg(long, value_name = "PER_M2")]
    pub point_density: Option<f64>,
    /// Number of cameras
    #[arg(long, value_name = "N")]
    pub camera_count: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct PatchFlags {
    /// Target patch size (meters)
    #[arg(long, value_name = "M")]
    pub patch_size: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct SplatFlags {
    /// Point splat radius (pixels)
    #[arg(long, value_name = "PX")]
    pub splat_radius: Option<u32>,
}

#[derive(Debug, Args, Default)]
pub struct NoiseFlags {
    /// Probability of flipping each foreground label to another active label
    #[arg(long, value_name = "P")]
    pub label_flip_prob: Option<f64>,
    /// Standard deviation of the per-pixel vote rotation (degrees)
    #[arg(long, value_name = "DEG")]
    pub vote_angle_sigma: Option<f64>,
    /// Occlusion block side as a fraction of image width and height
    #[arg(long, value_name = "FRAC")]
    pub occlusion_block_frac: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct DetectFlags {
    /// Size filter T_s: minimum patch pixels
    #[arg(long, value_name = "PX")]
    pub min_patch_px: Option<usize>,
    /// Vote-intersection RANSAC rounds
    #[arg(long, value_name = "N")]
    pub detect_ransac_iters: Option<usize>,
    /// Cosine threshold for a vote to support a hypothesis
    #[arg(long, value_name = "COS")]
    pub inlier_cos_thresh: Option<f64>,
    /// EM vote radius r (pixels)
    #[arg(long, value_name = "PX")]
    pub em_radius: Option<f64>,
    /// EM iterations
    #[arg(long, value_name = "N")]
    pub em_iters: Option<usize>,
    /// Minimum supporting votes T_v
    #[arg(long, value_name = "N")]
    pub min_support: Option<usize>,
    /// Minimum inlier fraction among votes within the EM radius
    #[arg(long, value_name = "FRAC")]
    pub min_inlier_frac: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PnpFlags {
    /// PnP inlier reprojection threshold (pixels)
    #[arg(long, value_name = "PX")]
    pub reproj_thresh: Option<f64>,
    /// PnP RANSAC rounds
    #[arg(long, value_name = "N")]
    pub pnp_ransac_iters: Option<usize>,
    /// Minimum PnP inliers
    #[arg(long, value_name = "N")]
    pub min_inliers: Option<usize>,
    /// Gauss-Newton refinement iterations
    #[arg(long, value_name = "N")]
    pub refine_iters: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct LossFlags {
    /// Triplet margin m
    #[arg(long)]
    pub margin: Option<f64>,
    /// kNN negatives per class
    #[arg(long, value_name = "K")]
    pub knn_k: Option<usize>,
    /// Voting loss weight
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Embedding dimension D
    #[arg(long, value_name = "D")]
    pub dim: Option<usize>,
}

macro_rules! put {
    ($kv:expr, $($key:literal => $val:expr),* $(,)?) => {
        $( if let Some(v) = &$val { $kv.insert($key, v); } )*
    };
}

/// Flag groups contribute their set values as config keys.
pub trait Overrides {
    fn collect(&self, kv: &mut KeyValues);
}

impl Overrides for SceneFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "shape" => self.shape, "extent" => self.extent,
            "point_density" => self.point_density, "camera_count" => self.camera_count);
    }
}

impl Overrides for PatchFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "patch_size" => self.patch_size);
    }
}

impl Overrides for SplatFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "splat_radius" => self.splat_radius);
    }
}

impl Overrides for NoiseFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "label_flip_prob" => self.label_flip_prob,
            "vote_angle_sigma" => self.vote_angle_sigma,
            "occlusion_block_frac" => self.occlusion_block_frac);
    }
}

impl Overrides for DetectFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "min_patch_px" => self.min_patch_px,
            "detect_ransac_iters" => self.detect_ransac_iters,
            "inlier_cos_thresh" => self.inlier_cos_thresh,
            "em_radius" => self.em_radius, "em_iters" => self.em_iters,
            "min_support" => self.min_support, "min_inlier_frac" => self.min_inlier_frac);
    }
}

impl Overrides for PnpFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "reproj_thresh" => self.reproj_thresh,
            "pnp_ransac_iters" => self.pnp_ransac_iters,
            "min_inliers" => self.min_inliers, "refine_iters" => self.refine_iters);
    }
}

impl Overrides for LossFlags {
    fn collect(&self, kv: &mut KeyValues) {
        put!(kv, "margin" => self.margin, "knn_k" => self.knn_k,
            "lambda" => self.lambda, "dim" => self.dim);
    }
}

/// Defaults, then the config file, then flag overrides; validated.
pub fn resolve(config: &ConfigFlag, groups: &[&dyn Overrides]) -> Result<Settings, CliError> {
    let mut settings = Settings::default();
    if let Some(path) = &config.config {
        let kv = KeyValues::parse(&load_text(path)?)?;
        settings.apply(&kv)?;
    }
    let mut kv = KeyValues::default();
    for g in groups {
        g.collect(&mut kv);
    }
    settings.apply(&kv)?;
    settings.validate()?;
    Ok(settings)
}
