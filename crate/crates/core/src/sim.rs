//! Synthetic scenes, map corruption, end-to-end trials, a dense
//! correspondence baseline, and experiment sweeps.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::detect::{detect_landmarks_report, DetectParams};
use crate::geometry::{back_project, pose_error, CameraIntrinsics, Point3, Pose};
use crate::landmark::{
    landmarks_from_patches, oversegment, render_view, splat, LandmarkError, LandmarkMaps, LandmarkSet, PatchSet,
    RenderedView, SurfaceCloud,
};
use crate::pnp::{ransac_pnp, Correspondence, PnPParams};

pub const MIN_VIEW_COVERAGE: f64 = 0.3;
pub const MAX_PLACEMENT_ATTEMPTS: usize = 100;
pub const MAX_DENSE_CORRESPONDENCES: usize = 5000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
    #[error("camera {camera}: no pose with {MIN_VIEW_COVERAGE} view coverage after {attempts} attempts")]
    Placement { camera: usize, attempts: usize },
    #[error("camera index {index} out of range for {count} cameras")]
    CameraIndex { index: usize, count: usize },
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SceneShape {
    BoxRoom,
    PlanarWall,
    RandomBlobs,
}

impl fmt::Display for SceneShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneShape::BoxRoom => "box-room",
            SceneShape::PlanarWall => "planar-wall",
            SceneShape::RandomBlobs => "random-blobs",
        })
    }
}

impl FromStr for SceneShape {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box-room" => Ok(SceneShape::BoxRoom),
            "planar-wall" => Ok(SceneShape::PlanarWall),
            "random-blobs" => Ok(SceneShape::RandomBlobs),
            other => Err(SimError::InvalidSpec(format!("unknown shape '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub shape: SceneShape,
    /// Side length of the scene in meters.
    pub extent: f64,
    /// Surface samples per square meter.
    pub point_density: f64,
    pub camera_count: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            shape: SceneShape::BoxRoom,
            extent: 4.0,
            point_density: 500.0,
            camera_count: 10,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(SimError::InvalidSpec(format!(
                "extent {} must be positive",
                self.extent
            )));
        }
        if !(self.point_density > 0.0 && self.point_density.is_finite()) {
            return Err(SimError::InvalidSpec(format!(
                "point density {} must be positive",
                self.point_density
            )));
        }
        if self.camera_count == 0 {
            return Err(SimError::InvalidSpec("camera count must be positive".into()));
        }
        Ok(())
    }
}

/// 320×240 pinhole camera with a 77° horizontal field of view.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(200.0, 200.0, 160.0, 120.0, 320, 240).expect("valid default intrinsics")
}

/// Independent seed for sub-stream `stream` of `seed` (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stratified samples on the parallelogram `origin + s·a + t·b`,
/// `s, t ∈ [0, 1)`: one jittered sample per grid cell of area `1/density`.
fn sample_rect(
    out: &mut Vec<Point3>,
    origin: Point3,
    a: Vector3<f64>,
    b: Vector3<f64>,
    density: f64,
    rng: &mut impl Rng,
) {
    let cell = density.sqrt().recip();
    let na = ((a.norm() / cell).round() as usize).max(1);
    let nb = ((b.norm() / cell).round() as usize).max(1);
    for i in 0..na {
        for j in 0..nb {
            let s = (i as f64 + rng.random::<f64>()) / na as f64;
            let t = (j as f64 + rng.random::<f64>()) / nb as f64;
            out.push(origin + a * s + b * t);
        }
    }
}

fn sample_sphere(out: &mut Vec<Point3>, center: Point3, radius: f64, density: f64, rng: &mut impl Rng) {
    let n = ((4.0 * std::f64::consts::PI * radius * radius * density).round() as usize).max(1);
    for _ in 0..n {
        let d = loop {
            let v = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            let norm = v.norm();
            if norm > 1e-12 {
                break v / norm;
            }
        };
        out.push(center + d * radius);
    }
}

fn generate_points(spec: &SceneSpec, rng: &mut impl Rng) -> Vec<Point3> {
    let e = spec.extent;
    let rho = spec.point_density;
    let (x, y, z) = (Vector3::x() * e, Vector3::y() * e, Vector3::z() * e);
    let o = Point3::zeros();
    let mut pts = Vec::new();
    match spec.shape {
        SceneShape::BoxRoom => {
            sample_rect(&mut pts, o, x, y, rho, rng);
            sample_rect(&mut pts, o + z, x, y, rho, rng);
            sample_rect(&mut pts, o, x, z, rho, rng);
            sample_rect(&mut pts, o + y, x, z, rho, rng);
            sample_rect(&mut pts, o, y, z, rho, rng);
            sample_rect(&mut pts, o + x, y, z, rho, rng);
        }
        // The plane y = 0.
        SceneShape::PlanarWall => sample_rect(&mut pts, o, x, z, rho, rng),
        SceneShape::RandomBlobs => {
            sample_rect(
                &mut pts,
                Point3::new(-0.5 * e, -0.5 * e, 0.0),
                x * 2.0,
                y * 2.0,
                rho,
                rng,
            );
            let blobs = rng.random_range(5..=8);
            for _ in 0..blobs {
                let r = rng.random_range(0.1 * e..0.2 * e);
                let c = Point3::new(
                    rng.random_range(0.2 * e..0.8 * e),
                    rng.random_range(0.2 * e..0.8 * e),
                    rng.random_range(r..0.6 * e),
                );
                sample_sphere(&mut pts, c, r, rho, rng);
            }
        }
    }
    pts
}

fn propose_pose(spec: &SceneSpec, rng: &mut impl Rng) -> Option<Pose> {
    let e = spec.extent;
    let up = Vector3::z();
    match spec.shape {
        SceneShape::BoxRoom => {
            let eye = Point3::new(
                rng.random_range(0.2 * e..0.8 * e),
                rng.random_range(0.2 * e..0.8 * e),
                rng.random_range(0.3 * e..0.7 * e),
            );
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let pitch = rng.random_range(-30f64..30.0).to_radians();
            let dir = Vector3::new(pitch.cos() * yaw.cos(), pitch.cos() * yaw.sin(), pitch.sin());
            Pose::look_at(eye, eye + dir, up)
        }
        SceneShape::PlanarWall => {
            let eye = Point3::new(
                rng.random_range(0.25 * e..0.75 * e),
                -rng.random_range(0.5 * e..1.0 * e),
                rng.random_range(0.25 * e..0.75 * e),
            );
            let target = Point3::new(
                rng.random_range(0.35 * e..0.65 * e),
                0.0,
                rng.random_range(0.35 * e..0.65 * e),
            );
            Pose::look_at(eye, target, up)
        }
        SceneShape::RandomBlobs => {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = rng.random_range(1.0 * e..1.4 * e);
            let eye = Point3::new(
                0.5 * e + dist * theta.cos(),
                0.5 * e + dist * theta.sin(),
                rng.random_range(0.3 * e..0.8 * e),
            );
            let target = Point3::new(
                rng.random_range(0.4 * e..0.6 * e),
                rng.random_range(0.4 * e..0.6 * e),
                rng.random_range(0.1 * e..0.3 * e),
            );
            Pose::look_at(eye, target, up)
        }
    }
}

/// Fraction of pixels covered by at least one splatted point.
pub fn view_coverage(cloud: &SurfaceCloud, k: &CameraIntrinsics, pose: &Pose, splat_radius: u32) -> f64 {
    let (_, idx) = splat(cloud, k, pose, splat_radius);
    idx.iter().filter(|&&i| i != u32::MAX).count() as f64 / idx.len() as f64
}

/// Surface cloud plus look-at cameras, each covering at least
/// [`MIN_VIEW_COVERAGE`] of its image. Deterministic in `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<(SurfaceCloud, Vec<(CameraIntrinsics, Pose)>), SimError> {
    generate_scene_with(spec, &default_intrinsics(), crate::landmark::DEFAULT_SPLAT_RADIUS)
}

pub fn generate_scene_with(
    spec: &SceneSpec,
    k: &CameraIntrinsics,
    splat_radius: u32,
) -> Result<(SurfaceCloud, Vec<(CameraIntrinsics, Pose)>), SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cloud = SurfaceCloud::new(generate_points(spec, &mut rng))?;
    let mut cameras = Vec::with_capacity(spec.camera_count);
    for camera in 0..spec.camera_count {
        let pose = (0..MAX_PLACEMENT_ATTEMPTS)
            .filter_map(|_| propose_pose(spec, &mut rng))
            .find(|pose| view_coverage(&cloud, k, pose, splat_radius) >= MIN_VIEW_COVERAGE)
            .ok_or(SimError::Placement {
                camera,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            })?;
        cameras.push((*k, pose));
    }
    Ok((cloud, cameras))
}

/// A generated scene with its landmarks and cached ground-truth views.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    pub cloud: SurfaceCloud,
    pub cameras: Vec<(CameraIntrinsics, Pose)>,
    pub patch_size: f64,
    pub splat_radius: u32,
    pub patches: PatchSet,
    pub landmarks: LandmarkSet,
    views: Vec<RenderedView>,
}

impl Scene {
    pub fn build(spec: &SceneSpec, patch_size: f64, splat_radius: u32) -> Result<Self, SimError> {
        let (cloud, cameras) = generate_scene_with(spec, &default_intrinsics(), splat_radius)?;
        Self::from_parts(*spec, cloud, cameras, patch_size, splat_radius)
    }

    pub fn from_parts(
        spec: SceneSpec,
        cloud: SurfaceCloud,
        cameras: Vec<(CameraIntrinsics, Pose)>,
        patch_size: f64,
        splat_radius: u32,
    ) -> Result<Self, SimError> {
        let patches = oversegment(&cloud, patch_size, spec.seed)?;
        let landmarks = landmarks_from_patches(&cloud, &patches)?;
        let views = cameras
            .iter()
            .map(|(k, pose)| render_view(&cloud, &patches, &landmarks, k, pose, splat_radius))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            spec,
            cloud,
            cameras,
            patch_size,
            splat_radius,
            patches,
            landmarks,
            views,
        })
    }

    /// Same cloud and cameras, re-segmented at `patch_size`.
    pub fn with_patch_size(&self, patch_size: f64) -> Result<Self, SimError> {
        Self::from_parts(
            self.spec,
            self.cloud.clone(),
            self.cameras.clone(),
            patch_size,
            self.splat_radius,
        )
    }

    pub fn view(&self, camera: usize) -> Result<&RenderedView, SimError> {
        self.views.get(camera).ok_or(SimError::CameraIndex {
            index: camera,
            count: self.cameras.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseSpec {
    pub label_flip_prob: f64,
    /// Standard deviation of the per-pixel vote rotation, degrees.
    pub vote_angle_sigma: f64,
    /// Side of the occlusion block as a fraction of the image width and height.
    pub occlusion_block_frac: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.label_flip_prob) {
            return Err(SimError::InvalidNoise(format!(
                "label_flip_prob {} outside [0, 1]",
                self.label_flip_prob
            )));
        }
        if !(self.vote_angle_sigma >= 0.0 && self.vote_angle_sigma.is_finite()) {
            return Err(SimError::InvalidNoise(format!(
                "vote_angle_sigma {} must be non-negative",
                self.vote_angle_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.occlusion_block_frac) {
            return Err(SimError::InvalidNoise(format!(
                "occlusion_block_frac {} outside [0, 1]",
                self.occlusion_block_frac
            )));
        }
        Ok(())
    }

    /// Fraction of image pixels inside the occlusion block.
    pub fn noise_ratio(&self) -> f64 {
        self.occlusion_block_frac * self.occlusion_block_frac
    }
}

/// Axis-aligned pixel rectangle `[u0, u0 + width) × [v0, v0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub u0: u32,
    pub v0: u32,
    pub width: u32,
    pub height: u32,
}

impl Block {
    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.u0 && u < self.u0 + self.width && v >= self.v0 && v < self.v0 + self.height
    }

    pub fn area(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const BLOCK_STREAM: u64 = 0;
const PIXEL_STREAM: u64 = 1;
const DENSE_STREAM: u64 = 2;

/// Seeded placement of the occlusion block for an `height × width` image.
pub fn occlusion_block(noise: &NoiseSpec, height: u32, width: u32) -> Option<Block> {
    let bw = (noise.occlusion_block_frac * width as f64).round() as u32;
    let bh = (noise.occlusion_block_frac * height as f64).round() as u32;
    if bw == 0 || bh == 0 {
        return None;
    }
    let mut rng = stream_rng(noise.seed, BLOCK_STREAM);
    Some(Block {
        u0: rng.random_range(0..=width - bw),
        v0: rng.random_range(0..=height - bh),
        width: bw,
        height: bh,
    })
}

fn rotate(v: [f32; 2], angle: f64) -> [f32; 2] {
    let (s, c) = angle.sin_cos();
    let (x, y) = (v[0] as f64, v[1] as f64);
    let (rx, ry) = (c * x - s * y, s * x + c * y);
    let n = rx.hypot(ry);
    [(rx / n) as f32, (ry / n) as f32]
}

/// Simulated prediction errors on ground-truth maps: label flips to other
/// active labels, Gaussian vote rotation, and an occlusion block of random
/// active labels and directions. Pixels are visited in row-major order.
pub fn corrupt_maps(maps: &LandmarkMaps, noise: &NoiseSpec) -> LandmarkMaps {
    let mut out = maps.clone();
    let active = maps.active_labels();
    let mut rng = stream_rng(noise.seed, PIXEL_STREAM);
    let angle = (noise.vote_angle_sigma > 0.0)
        .then(|| Normal::new(0.0, noise.vote_angle_sigma.to_radians()).expect("finite sigma"));

    for idx in 0..out.len() {
        let l = out.labels[idx];
        if l == 0 {
            continue;
        }
        if noise.label_flip_prob > 0.0 && active.len() >= 2 && rng.random_bool(noise.label_flip_prob) {
            let pos = active.binary_search(&l).unwrap_or(0);
            let mut j = rng.random_range(0..active.len() - 1);
            if j >= pos {
                j += 1;
            }
            out.labels[idx] = active[j];
        }
        if let Some(dist) = &angle {
            let v = out.votes[idx];
            if v != [0.0, 0.0] {
                out.votes[idx] = rotate(v, dist.sample(&mut rng));
            }
        }
    }

    let pool: Vec<u32> = if active.is_empty() {
        (1..=maps.n).collect()
    } else {
        active
    };
    if let (Some(block), false) = (occlusion_block(noise, maps.height, maps.width), pool.is_empty()) {
        for v in block.v0..block.v0 + block.height {
            for u in block.u0..block.u0 + block.width {
                let idx = out.index(u, v);
                out.labels[idx] = pool[rng.random_range(0..pool.len())];
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                out.votes[idx] = [a.cos() as f32, a.sin() as f32];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    /// Meters; infinite on failure.
    pub positional_error: f64,
    /// Degrees; infinite on failure.
    pub angular_error: f64,
    /// Accepted landmarks (dense baseline: correspondences used).
    pub detected_count: usize,
    pub dropped_count: usize,
    pub failure: bool,
    /// Mean pixel distance of accepted landmarks from their true projections.
    pub detection_error_px: Option<f64>,
}

impl TrialResult {
    fn failed(detected_count: usize, dropped_count: usize, detection_error_px: Option<f64>) -> Self {
        Self {
            positional_error: f64::INFINITY,
            angular_error: f64::INFINITY,
            detected_count,
            dropped_count,
            failure: true,
            detection_error_px,
        }
    }
}

/// Ground-truth maps → corruption → landmark detection → RANSAC-PnP, scored
/// against the true camera pose.
pub fn run_pipeline(
    scene: &Scene,
    camera: usize,
    noise: &NoiseSpec,
    detect: &DetectParams,
    pnp: &PnPParams,
    seed: u64,
) -> Result<TrialResult, SimError> {
    noise.validate()?;
    let view = scene.view(camera)?;
    let (k, truth) = scene.cameras[camera];
    let maps = corrupt_maps(&view.maps, noise);
    let report = detect_landmarks_report(&maps, detect, seed);

    let mut errors = Vec::new();
    let corrs: Vec<Correspondence> = report
        .landmarks
        .iter()
        .filter_map(|d| {
            if let Some(Some(truth_px)) = view.projections.get(d.landmark_id as usize - 1) {
                errors.push(d.location.distance(*truth_px));
            }
            scene.landmarks.get(d.landmark_id).map(|lm| Correspondence {
                image: d.location,
                world: lm.position,
                landmark_id: d.landmark_id,
            })
        })
        .collect();
    let detection_error_px = (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64);
    let (detected, dropped) = (report.landmarks.len(), report.dropped());
    if corrs.len() < pnp.min_inliers {
        return Ok(TrialResult::failed(detected, dropped, detection_error_px));
    }
    Ok(match ransac_pnp(&corrs, &k, pnp, seed) {
        Ok(est) => {
            let (pos, ang) = pose_error(&est.pose, &truth);
            TrialResult {
                positional_error: pos,
                angular_error: ang,
                detected_count: detected,
                dropped_count: dropped,
                failure: false,
                detection_error_px,
            }
        }
        Err(_) => TrialResult::failed(detected, dropped, detection_error_px),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseParams {
    /// Per-pixel 3D noise standard deviation per unit of
    /// `depth · tan(vote_angle_sigma)`.
    pub noise_scale: f64,
    pub max_correspondences: usize,
}

impl Default for DenseParams {
    fn default() -> Self {
        Self {
            noise_scale: 1.0,
            max_correspondences: MAX_DENSE_CORRESPONDENCES,
        }
    }
}

/// Stand-in for per-pixel scene-coordinate regression: every foreground
/// pixel (and every occlusion-block pixel) yields a pixel → 3D point
/// correspondence, corrupted by the same [`NoiseSpec`], and the pose comes
/// from [`ransac_pnp`] on a uniform subsample.
pub fn dense_baseline(
    scene: &Scene,
    camera: usize,
    noise: &NoiseSpec,
    pnp: &PnPParams,
    dense: &DenseParams,
    seed: u64,
) -> Result<TrialResult, SimError> {
    noise.validate()?;
    let view = scene.view(camera)?;
    let (k, truth) = scene.cameras[camera];
    let maps = &view.maps;
    let block = occlusion_block(noise, maps.height, maps.width);
    let in_block = |idx: usize| {
        let p = maps.pixel(idx);
        block.is_some_and(|b| b.contains(p.u as u32, p.v as u32))
    };
    let candidates: Vec<usize> = (0..maps.len())
        .filter(|&i| maps.labels[i] != 0 || in_block(i))
        .collect();

    let mut rng = stream_rng(noise.seed, DENSE_STREAM);
    let chosen: Vec<usize> = if candidates.len() > dense.max_correspondences {
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), dense.max_correspondences)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        picked
    } else {
        candidates
    };

    let (lo, hi) = scene.cloud.bounds();
    let sigma = noise.vote_angle_sigma.to_radians().tan() * dense.noise_scale;
    let corrs: Vec<Correspondence> = chosen
        .iter()
        .map(|&idx| {
            let image = maps.pixel(idx);
            let world = if in_block(idx) {
                Point3::from_fn(|i, _| {
                    if hi[i] > lo[i] {
                        rng.random_range(lo[i]..hi[i])
                    } else {
                        lo[i]
                    }
                })
            } else if noise.label_flip_prob > 0.0 && rng.random_bool(noise.label_flip_prob) {
                scene.cloud.points[rng.random_range(0..scene.cloud.len())]
            } else {
                let depth = view.depth[idx];
                let exact = back_project(image, depth, &k, &truth);
                if sigma > 0.0 {
                    let g = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
                    exact + g * (sigma * depth)
                } else {
                    exact
                }
            };
            Correspondence {
                image,
                world,
                landmark_id: idx as u32,
            }
        })
        .collect();

    let used = corrs.len();
    if used < pnp.min_inliers {
        return Ok(TrialResult::failed(used, 0, None));
    }
    Ok(match ransac_pnp(&corrs, &k, pnp, seed) {
        Ok(est) => {
            let (pos, ang) = pose_error(&est.pose, &truth);
            TrialResult {
                positional_error: pos,
                angular_error: ang,
                detected_count: used,
                dropped_count: 0,
                failure: false,
                detection_error_px: None,
            }
        }
        Err(_) => TrialResult::failed(used, 0, None),
    })
}

/// Relabels the active labels of `maps` to `1..=m` in increasing order.
pub fn compact_labels(maps: &LandmarkMaps) -> LandmarkMaps {
    let active = maps.active_labels();
    let mut lut = vec![0u32; maps.n as usize + 1];
    for (i, &l) in active.iter().enumerate() {
        lut[l as usize] = i as u32 + 1;
    }
    LandmarkMaps {
        height: maps.height,
        width: maps.width,
        n: active.len() as u32,
        labels: maps.labels.iter().map(|&l| lut[l as usize]).collect(),
        votes: maps.votes.clone(),
    }
}

/// Compacted ground-truth maps of one `side × side` view into a box room
/// segmented at `patch_size`: a small segmentation target.
pub fn toy_label_map(side: u32, patch_size: f64, seed: u64) -> Result<LandmarkMaps, SimError> {
    let f = side as f64 * 0.625;
    let half = side as f64 / 2.0;
    let k = CameraIntrinsics::new(f, f, half, half, side, side).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
    let spec = SceneSpec {
        camera_count: 1,
        seed,
        ..Default::default()
    };
    let (cloud, cameras) = generate_scene_with(&spec, &k, 1)?;
    let patches = oversegment(&cloud, patch_size, seed)?;
    let lms = landmarks_from_patches(&cloud, &patches)?;
    let view = render_view(&cloud, &patches, &lms, &k, &cameras[0].1, 1)?;
    Ok(compact_labels(&view.maps))
}

/// Median with failures counted as infinite error; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub trial: usize,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SettingSummary {
    pub setting: String,
    /// Swept value (block fraction or patch size).
    pub value: f64,
    pub trials: usize,
    pub failures: usize,
    pub median_pos_err: f64,
    pub median_ang_err: f64,
    pub mean_dropped: f64,
    pub mean_detection_error_px: Option<f64>,
    pub landmark_count: Option<usize>,
}

impl SettingSummary {
    fn from_rows(setting: &str, value: f64, rows: &[SweepRow], landmark_count: Option<usize>) -> Self {
        let pos: Vec<f64> = rows.iter().map(|r| r.result.positional_error).collect();
        let ang: Vec<f64> = rows.iter().map(|r| r.result.angular_error).collect();
        let det: Vec<f64> = rows.iter().filter_map(|r| r.result.detection_error_px).collect();
        Self {
            setting: setting.to_string(),
            value,
            trials: rows.len(),
            failures: rows.iter().filter(|r| r.result.failure).count(),
            median_pos_err: median(&pos),
            median_ang_err: median(&ang),
            mean_dropped: rows.iter().map(|r| r.result.dropped_count as f64).sum::<f64>() / rows.len().max(1) as f64,
            mean_detection_error_px: (!det.is_empty()).then(|| det.iter().sum::<f64>() / det.len() as f64),
            landmark_count,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub summaries: Vec<SettingSummary>,
}

pub const CSV_HEADER: &str = "setting,trial,pos_err_m,ang_err_deg,detected,dropped,failed";

impl SweepTable {
    pub fn summary(&self, setting: &str) -> Option<&SettingSummary> {
        self.summaries.iter().find(|s| s.setting == setting)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format_trial_row(&r.setting, r.trial, &r.result));
            s.push('\n');
        }
        s
    }

    /// Whitespace-separated per-setting medians for plotting tools.
    pub fn to_plot_data(&self) -> String {
        let mut s = String::from(
            "# setting value median_pos_err_m median_ang_err_deg failures trials mean_dropped landmarks\n",
        );
        for m in &self.summaries {
            s.push_str(&format!(
                "{} {} {} {} {} {} {} {}\n",
                m.setting,
                m.value,
                m.median_pos_err,
                m.median_ang_err,
                m.failures,
                m.trials,
                m.mean_dropped,
                m.landmark_count.map_or("-".to_string(), |c| c.to_string()),
            ));
        }
        s
    }
}

pub fn format_trial_row(setting: &str, trial: usize, r: &TrialResult) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        setting,
        trial,
        r.positional_error,
        r.angular_error,
        r.detected_count,
        r.dropped_count,
        u8::from(r.failure)
    )
}

#[cfg(feature = "parallel")]
fn map_trials<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_trials<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepConfig {
    pub fracs: Vec<f64>,
    pub trials: usize,
    /// Noise present in every setting; its block fraction is overridden.
    pub base: NoiseSpec,
    pub detect: DetectParams,
    pub pnp: PnPParams,
    /// Also run the dense baseline when set.
    pub dense: Option<DenseParams>,
    pub seed: u64,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        Self {
            fracs: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            trials: 20,
            base: NoiseSpec {
                vote_angle_sigma: 2.0,
                ..Default::default()
            },
            detect: DetectParams::default(),
            pnp: PnPParams::default(),
            dense: Some(DenseParams::default()),
            seed: 0,
        }
    }
}

/// Noise and pipeline seeds of one trial.
pub fn trial_seeds(seed: u64, setting: usize, trial: usize) -> (u64, u64) {
    let s = derive_seed(derive_seed(seed, setting as u64), trial as u64);
    (s, derive_seed(s, 0))
}

fn format_setting(prefix: &str, value: f64) -> String {
    format!("{prefix}@{value}")
}

/// Landmark pipeline (and optionally the dense baseline) at each occlusion
/// block fraction; trial `t` uses camera `t mod cameras`.
pub fn experiment_noise_sweep(scene: &Scene, cfg: &NoiseSweepConfig) -> Result<SweepTable, SimError> {
    let cams = scene.cameras.len();
    let mut table = SweepTable::default();
    for (si, &frac) in cfg.fracs.iter().enumerate() {
        let run = |t: usize| -> Result<(TrialResult, Option<TrialResult>), SimError> {
            let (noise_seed, seed) = trial_seeds(cfg.seed, si, t);
            let noise = NoiseSpec {
                occlusion_block_frac: frac,
                seed: noise_seed,
                ..cfg.base
            };
            let lm = run_pipeline(scene, t % cams, &noise, &cfg.detect, &cfg.pnp, seed)?;
            let dense = match &cfg.dense {
                Some(d) => Some(dense_baseline(scene, t % cams, &noise, &cfg.pnp, d, seed)?),
                None => None,
            };
            Ok((lm, dense))
        };
        let results = map_trials(cfg.trials, run).into_iter().collect::<Result<Vec<_>, _>>()?;
        let lm_name = format_setting("lm", frac);
        let lm_rows: Vec<SweepRow> = results
            .iter()
            .enumerate()
            .map(|(t, (r, _))| SweepRow {
                setting: lm_name.clone(),
                trial: t,
                result: *r,
            })
            .collect();
        table
            .summaries
            .push(SettingSummary::from_rows(&lm_name, frac, &lm_rows, None));
        table.rows.extend(lm_rows);
        if cfg.dense.is_some() {
            let name = format_setting("dense", frac);
            let rows: Vec<SweepRow> = results
                .iter()
                .enumerate()
                .filter_map(|(t, (_, d))| {
                    d.map(|result| SweepRow {
                        setting: name.clone(),
                        trial: t,
                        result,
                    })
                })
                .collect();
            table
                .summaries
                .push(SettingSummary::from_rows(&name, frac, &rows, None));
            table.rows.extend(rows);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSweepConfig {
    pub sizes: Vec<f64>,
    pub trials: usize,
    pub noise: NoiseSpec,
    pub detect: DetectParams,
    pub pnp: PnPParams,
    pub seed: u64,
}

impl Default for PatchSweepConfig {
    fn default() -> Self {
        Self {
            sizes: vec![0.10, 0.15, 0.25, 0.5],
            trials: 20,
            noise: NoiseSpec::default(),
            detect: DetectParams::default(),
            pnp: PnPParams::default(),
            seed: 0,
        }
    }
}

/// Landmark pipeline after re-segmenting the scene at each patch size.
pub fn experiment_patch_sweep(scene: &Scene, cfg: &PatchSweepConfig) -> Result<SweepTable, SimError> {
    let cams = scene.cameras.len();
    let mut table = SweepTable::default();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let resegmented = scene.with_patch_size(size)?;
        let run = |t: usize| -> Result<TrialResult, SimError> {
            let (noise_seed, seed) = trial_seeds(cfg.seed, si, t);
            let noise = NoiseSpec {
                seed: noise_seed,
                ..cfg.noise
            };
            run_pipeline(&resegmented, t % cams, &noise, &cfg.detect, &cfg.pnp, seed)
        };
        let name = format_setting("lm", size);
        let rows: Vec<SweepRow> = map_trials(cfg.trials, run)
            .into_iter()
            .enumerate()
            .map(|(t, r)| {
                r.map(|result| SweepRow {
                    setting: name.clone(),
                    trial: t,
                    result,
                })
            })
            .collect::<Result<_, _>>()?;
        table.summaries.push(SettingSummary::from_rows(
            &name,
            size,
            &rows,
            Some(resegmented.landmarks.len()),
        ));
        table.rows.extend(rows);
    }
    Ok(table)
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

const CALIBRATION_ROUNDS: usize = 6;

/// Chooses the dense noise scale so that, under `base` noise without
/// occlusion, the dense baseline's median positional error matches the
/// landmark pipeline's. Fixed-point iteration on the error ratio.
pub fn calibrate_dense(
    scene: &Scene,
    base: &NoiseSpec,
    detect: &DetectParams,
    pnp: &PnPParams,
    trials: usize,
    seed: u64,
) -> Result<DenseParams, SimError> {
    let cams = scene.cameras.len();
    let noise_for = |t: usize| NoiseSpec {
        occlusion_block_frac: 0.0,
        seed: trial_seeds(seed, usize::MAX, t).0,
        ..*base
    };
    let lm: Vec<f64> = map_trials(trials, |t| {
        run_pipeline(
            scene,
            t % cams,
            &noise_for(t),
            detect,
            pnp,
            trial_seeds(seed, usize::MAX, t).1,
        )
        .map(|r| r.positional_error)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let target = median(&lm);
    let mut params = DenseParams::default();
    if !(base.vote_angle_sigma > 0.0) || !(target.is_finite() && target > 0.0) {
        return Ok(params);
    }
    for _ in 0..CALIBRATION_ROUNDS {
        let d: Vec<f64> = map_trials(trials, |t| {
            dense_baseline(
                scene,
                t % cams,
                &noise_for(t),
                pnp,
                &params,
                trial_seeds(seed, usize::MAX, t).1,
            )
            .map(|r| r.positional_error)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
        let got = median(&d);
        // A failing majority means the noise swamps the inlier threshold.
        let ratio = if got.is_finite() && got > 0.0 {
            target / got
        } else {
            0.1
        };
        params.noise_scale *= ratio.clamp(0.1, 10.0);
    }
    Ok(params)
}
