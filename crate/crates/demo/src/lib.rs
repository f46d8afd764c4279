//! Browser bindings for a synthetic scene: view rendering, corrupted-map
//! localization and the loss cost comparison.

use wasm_bindgen::prelude::*;

use vsloc::cost::{cost_model, format_cost_table, CostParams};
use vsloc::detect::{detect_landmarks_report, DetectParams};
use vsloc::geometry::{pose_error, Pixel};
use vsloc::landmark::LandmarkMaps;
use vsloc::pnp::{ransac_pnp, Correspondence, PnPParams};
use vsloc::sim::{corrupt_maps, NoiseSpec, Scene, SceneSpec};

/// A generated scene with its landmarks and rendered ground-truth views.
#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    /// `shape` is `box-room`, `planar-wall` or `random-blobs`.
    #[wasm_bindgen(constructor)]
    pub fn new(shape: &str, point_density: f64, patch_size: f64, seed: u32) -> Result<Demo, String> {
        let spec = SceneSpec {
            shape: shape.parse().map_err(|e| format!("{e}"))?,
            point_density,
            seed: u64::from(seed),
            ..SceneSpec::default()
        };
        spec.validate().map_err(|e| e.to_string())?;
        let scene = Scene::build(&spec, patch_size, 1).map_err(|e| e.to_string())?;
        Ok(Demo { scene })
    }

    pub fn camera_count(&self) -> usize {
        self.scene.cameras.len()
    }

    pub fn landmark_count(&self) -> usize {
        self.scene.landmarks.len()
    }

    pub fn width(&self) -> u32 {
        self.scene.cameras[0].0.width
    }

    pub fn height(&self) -> u32 {
        self.scene.cameras[0].0.height
    }

    /// RGBA pixels of the ground-truth maps; `mode` is `labels` or `votes`.
    pub fn render(&self, camera: usize, mode: &str) -> Result<Vec<u8>, String> {
        let maps = &self.scene.view(camera).map_err(|e| e.to_string())?.maps;
        match mode {
            "labels" => Ok(label_image(maps)),
            "votes" => Ok(vote_image(maps)),
            other => Err(format!("unknown mode '{other}'")),
        }
    }

    /// Corrupts the view's maps, detects landmarks and estimates the pose.
    pub fn localize(
        &self,
        camera: usize,
        label_flip_prob: f64,
        vote_angle_sigma: f64,
        occlusion_block_frac: f64,
        seed: u32,
    ) -> Result<Localization, String> {
        let view = self.scene.view(camera).map_err(|e| e.to_string())?;
        let noise = NoiseSpec {
            label_flip_prob,
            vote_angle_sigma,
            occlusion_block_frac,
            seed: u64::from(seed),
        };
        noise.validate().map_err(|e| e.to_string())?;
        let (k, truth) = self.scene.cameras[camera];
        let maps = corrupt_maps(&view.maps, &noise);
        let report = detect_landmarks_report(&maps, &DetectParams::default(), noise.seed);

        let mut image = label_image(&maps);
        for px in image.chunks_exact_mut(4) {
            for c in &mut px[..3] {
                *c /= 2;
            }
        }
        let mut detection_errors = Vec::new();
        let mut corrs = Vec::new();
        for d in &report.landmarks {
            if let Some(Some(p)) = view.projections.get(d.landmark_id as usize - 1) {
                detection_errors.push(d.location.distance(*p));
                mark(&mut image, maps.width, maps.height, *p, [255, 64, 64, 255], 2);
            }
            mark(&mut image, maps.width, maps.height, d.location, [64, 255, 64, 255], 4);
            if let Some(lm) = self.scene.landmarks.get(d.landmark_id) {
                corrs.push(Correspondence {
                    image: d.location,
                    world: lm.position,
                    landmark_id: d.landmark_id,
                });
            }
        }

        let params = PnPParams::default();
        let estimate = (corrs.len() >= params.min_inliers)
            .then(|| ransac_pnp(&corrs, &k, &params, noise.seed).ok())
            .flatten();
        let (position_error, angular_error, inliers) = match &estimate {
            Some(est) => {
                let (p, a) = pose_error(&est.pose, &truth);
                (p, a, est.inlier_ids.len())
            }
            None => (f64::INFINITY, f64::INFINITY, 0),
        };
        let mean_detection_error = if detection_errors.is_empty() {
            f64::NAN
        } else {
            detection_errors.iter().sum::<f64>() / detection_errors.len() as f64
        };
        Ok(Localization {
            detected: report.landmarks.len(),
            dropped: report.dropped(),
            inliers,
            success: estimate.is_some(),
            position_error,
            angular_error,
            mean_detection_error,
            image,
        })
    }
}

/// Outcome of one corrupted-map localization.
#[wasm_bindgen]
pub struct Localization {
    pub detected: usize,
    pub dropped: usize,
    pub inliers: usize,
    pub success: bool,
    /// Meters; infinite on failure.
    pub position_error: f64,
    /// Degrees; infinite on failure.
    pub angular_error: f64,
    /// Pixels; NaN when nothing was detected.
    pub mean_detection_error: f64,
    image: Vec<u8>,
}

#[wasm_bindgen]
impl Localization {
    /// RGBA overlay: dimmed corrupted labels, detections in green, true
    /// projections in red.
    pub fn image(&self) -> Vec<u8> {
        self.image.clone()
    }
}

/// Per-stage FLOP and memory table for cross entropy against the prototype
/// triplet loss.
#[wasm_bindgen]
pub fn cost_table(height: u32, width: u32, classes: u32, dim: u32, active: u32) -> Result<String, String> {
    if [height, width, classes, dim, active].contains(&0) {
        return Err("all sizes must be positive".into());
    }
    if active > classes {
        return Err(format!("active labels {active} exceed classes {classes}"));
    }
    let p = CostParams {
        height: height.into(),
        width: width.into(),
        classes: classes.into(),
        dim: dim.into(),
        active: active.into(),
    };
    let (ce, triplet) = cost_model(&p);
    Ok(format_cost_table(&p, &ce, &triplet))
}

fn label_color(label: u32) -> [u8; 4] {
    if label == 0 {
        return [0, 0, 0, 255];
    }
    let h = label
        .wrapping_mul(0x9e37_79b9)
        .rotate_left(13)
        .wrapping_mul(0x85eb_ca6b);
    let [a, b, c, _] = h.to_le_bytes();
    [64 | a, 64 | b, 64 | c, 255]
}

fn label_image(maps: &LandmarkMaps) -> Vec<u8> {
    maps.labels.iter().flat_map(|&l| label_color(l)).collect()
}

/// Vote direction as hue; background black.
fn vote_image(maps: &LandmarkMaps) -> Vec<u8> {
    maps.labels
        .iter()
        .zip(&maps.votes)
        .flat_map(|(&l, v)| {
            if l == 0 {
                return [0, 0, 0, 255];
            }
            let hue = (f64::from(v[1]).atan2(f64::from(v[0])) / std::f64::consts::TAU).rem_euclid(1.0);
            hsv(hue)
        })
        .collect()
}

fn hsv(hue: f64) -> [u8; 4] {
    let x = hue * 6.0;
    let f = |n: f64| {
        let k = (n + x) % 6.0;
        let c = 1.0 - (k.min(4.0 - k).clamp(0.0, 1.0));
        (c * 255.0).round() as u8
    };
    [f(5.0), f(3.0), f(1.0), 255]
}

fn mark(image: &mut [u8], width: u32, height: u32, at: Pixel, color: [u8; 4], arm: i64) {
    let (cu, cv) = (at.u.floor() as i64, at.v.floor() as i64);
    for d in -arm..=arm {
        for (u, v) in [(cu + d, cv), (cu, cv + d)] {
            if (0..i64::from(width)).contains(&u) && (0..i64::from(height)).contains(&v) {
                let i = 4 * (v as usize * width as usize + u as usize);
                image[i..i + 4].copy_from_slice(&color);
            }
        }
    }
}
