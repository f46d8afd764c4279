//! Voting-by-segmentation landmark detection.
//!
//! Pixels are grouped by segmentation label, small groups are discarded, and
//! each surviving group's directional votes are intersected: RANSAC over vote
//! pairs gives an initial location, then an EM loop alternates between
//! collecting consistent votes near the current estimate and re-solving the
//! least-squares intersection of their lines. Groups whose votes do not agree
//! are dropped.

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Pixel;
use crate::landmark::LandmarkMaps;

/// Cross products below this mark two votes as parallel.
pub const PARALLEL_EPS: f64 = 1e-8;
/// Largest condition number accepted for the least-squares normal matrix.
pub const MAX_CONDITION: f64 = 1e8;
/// EM stops once an update moves the estimate less than this (pixels).
pub const EM_CONVERGENCE_PX: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Minimum pixel count of a label group (T_s).
    pub min_patch_px: usize,
    pub ransac_iters: usize,
    /// A vote is an inlier when the cosine between it and the direction to
    /// the hypothesis exceeds this.
    pub inlier_cos_thresh: f64,
    /// Radius (pixels) of the region around the estimate whose votes the
    /// E-step considers.
    pub em_radius: f64,
    pub em_iters: usize,
    /// Minimum number of inlier votes (T_v).
    pub min_support: usize,
    /// Minimum share of the votes inside the EM radius that must be inliers.
    pub min_inlier_frac: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            min_patch_px: 50,
            ransac_iters: 256,
            inlier_cos_thresh: 0.99,
            em_radius: 30.0,
            em_iters: 10,
            min_support: 20,
            min_inlier_frac: 0.4,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_patch_px == 0 || self.ransac_iters == 0 || self.em_iters == 0 || self.min_support == 0 {
            return Err("counts must be positive".into());
        }
        if !(self.inlier_cos_thresh > 0.0 && self.inlier_cos_thresh < 1.0) {
            return Err(format!("inlier_cos_thresh {} outside (0, 1)", self.inlier_cos_thresh));
        }
        if !(self.em_radius > 0.0) {
            return Err(format!("em_radius {} must be positive", self.em_radius));
        }
        if !(0.0..=1.0).contains(&self.min_inlier_frac) {
            return Err(format!("min_inlier_frac {} outside [0, 1]", self.min_inlier_frac));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedLandmark {
    pub landmark_id: u32,
    pub location: Pixel,
    /// Number of inlier votes behind the final estimate.
    pub support: usize,
    /// Root-mean-square perpendicular distance (pixels) from the estimate to
    /// the inlier vote lines.
    pub residual: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Rejection {
    #[error("patch has {pixels} pixels, below the size threshold {required}")]
    TooSmall { pixels: usize, required: usize },
    #[error("only {support} supporting votes, {required} required")]
    InsufficientSupport { support: usize, required: usize },
    #[error("inconsistent votes: {inliers} of {candidates} agree")]
    Inconsistent { inliers: usize, candidates: usize },
    #[error("degenerate vote bundle")]
    Degenerate,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntersectError {
    #[error("need at least 2 votes, got {0}")]
    TooFewVotes(usize),
    #[error("near-parallel vote bundle (condition number {0:e})")]
    IllConditioned(f64),
    #[error("pixel and direction counts differ")]
    LengthMismatch,
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Intersection of the lines `p1 + t1·d1` and `p2 + t2·d2`; `None` when the
/// directions are parallel.
pub fn intersect_two_rays(p1: Pixel, d1: Vector2<f64>, p2: Pixel, d2: Vector2<f64>) -> Option<Pixel> {
    let denom = cross(d1, d2);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let diff = p2.to_vector() - p1.to_vector();
    let t1 = cross(diff, d2) / denom;
    Some(Pixel::from_vector(p1.to_vector() + d1 * t1))
}

/// Point minimizing `Σ ‖(I − d dᵀ)(x − p)‖²`, the summed squared distances to
/// the vote lines.
pub fn least_squares_intersection(pixels: &[Pixel], dirs: &[Vector2<f64>]) -> Result<Pixel, IntersectError> {
    if pixels.len() != dirs.len() {
        return Err(IntersectError::LengthMismatch);
    }
    if pixels.len() < 2 {
        return Err(IntersectError::TooFewVotes(pixels.len()));
    }
    let mut a = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for (p, d) in pixels.iter().zip(dirs) {
        let proj = Matrix2::identity() - d * d.transpose();
        a += proj;
        b += proj * p.to_vector();
    }
    let eig = a.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
    if !(cond <= MAX_CONDITION) {
        return Err(IntersectError::IllConditioned(cond));
    }
    let inv = a.try_inverse().ok_or(IntersectError::IllConditioned(cond))?;
    Ok(Pixel::from_vector(inv * b))
}

/// Perpendicular distance from `x` to the line through `p` along unit `d`.
pub fn line_distance(x: Pixel, p: Pixel, d: Vector2<f64>) -> f64 {
    cross(d, x.to_vector() - p.to_vector()).abs()
}

fn rms_line_distance(x: Pixel, pixels: &[Pixel], dirs: &[Vector2<f64>], set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let ss: f64 = set.iter().map(|&i| line_distance(x, pixels[i], dirs[i]).powi(2)).sum();
    (ss / set.len() as f64).sqrt()
}

fn is_inlier(h: Pixel, p: Pixel, d: Vector2<f64>, thresh: f64) -> bool {
    let to = h.to_vector() - p.to_vector();
    let n = to.norm();
    n < 1e-9 || d.dot(&to) / n > thresh
}

/// Image extent used to discard absurd hypotheses: a hypothesis further than
/// twice the image diagonal outside the image is rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageBounds {
    pub width: f64,
    pub height: f64,
}

impl ImageBounds {
    pub fn admits(&self, h: Pixel) -> bool {
        let margin = 2.0 * self.width.hypot(self.height);
        h.u >= -margin && h.v >= -margin && h.u <= self.width + margin && h.v <= self.height + margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub location: Pixel,
    pub inliers: Vec<bool>,
    pub support: usize,
}

/// Best two-vote intersection by inlier count; the earliest round wins ties.
pub fn ransac_vote_intersection(
    pixels: &[Pixel],
    dirs: &[Vector2<f64>],
    params: &DetectParams,
    seed: u64,
    bounds: Option<ImageBounds>,
) -> Result<Hypothesis, Rejection> {
    let n = pixels.len().min(dirs.len());
    if n < 2 {
        return Err(Rejection::InsufficientSupport {
            support: n,
            required: params.min_support,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Pixel)> = None;
    for _ in 0..params.ransac_iters {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(h) = intersect_two_rays(pixels[i], dirs[i], pixels[j], dirs[j]) else {
            continue;
        };
        if !h.is_finite() || bounds.is_some_and(|b| !b.admits(h)) {
            continue;
        }
        let count = (0..n)
            .filter(|&k| is_inlier(h, pixels[k], dirs[k], params.inlier_cos_thresh))
            .count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, h));
        }
    }
    let Some((support, location)) = best else {
        return Err(Rejection::Degenerate);
    };
    if support < params.min_support {
        return Err(Rejection::InsufficientSupport {
            support,
            required: params.min_support,
        });
    }
    let inliers = (0..n)
        .map(|k| is_inlier(location, pixels[k], dirs[k], params.inlier_cos_thresh))
        .collect();
    Ok(Hypothesis {
        location,
        inliers,
        support,
    })
}

/// Outcome of EM refinement, with the inlier set of the final M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub location: Pixel,
    pub support: usize,
    pub residual: f64,
    /// RMS line distance of the final inlier set evaluated at the initial
    /// location.
    pub initial_residual: f64,
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

impl Refinement {
    pub fn into_detection(self, landmark_id: u32) -> DetectedLandmark {
        DetectedLandmark {
            landmark_id,
            location: self.location,
            support: self.support,
            residual: self.residual,
        }
    }
}

/// EM refinement. The E-step keeps votes whose pixel lies within
/// `em_radius` of the estimate and that pass the inlier test; the M-step
/// re-solves the least-squares intersection of those votes.
pub fn em_refine(
    initial: Pixel,
    pixels: &[Pixel],
    dirs: &[Vector2<f64>],
    params: &DetectParams,
) -> Result<Refinement, Rejection> {
    let mut location = initial;
    let mut inliers: Vec<usize> = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.em_iters {
        iterations += 1;
        let mut candidates = 0usize;
        inliers.clear();
        for (k, (&p, &d)) in pixels.iter().zip(dirs).enumerate() {
            if p.distance(location) > params.em_radius {
                continue;
            }
            candidates += 1;
            if is_inlier(location, p, d, params.inlier_cos_thresh) {
                inliers.push(k);
            }
        }
        if inliers.len() < params.min_support {
            return Err(Rejection::InsufficientSupport {
                support: inliers.len(),
                required: params.min_support,
            });
        }
        if (inliers.len() as f64) < params.min_inlier_frac * candidates as f64 {
            return Err(Rejection::Inconsistent {
                inliers: inliers.len(),
                candidates,
            });
        }
        let sel_p: Vec<Pixel> = inliers.iter().map(|&k| pixels[k]).collect();
        let sel_d: Vec<Vector2<f64>> = inliers.iter().map(|&k| dirs[k]).collect();
        let next = least_squares_intersection(&sel_p, &sel_d).map_err(|_| Rejection::Degenerate)?;
        let moved = next.distance(location);
        location = next;
        if moved < EM_CONVERGENCE_PX {
            break;
        }
    }
    Ok(Refinement {
        location,
        support: inliers.len(),
        residual: rms_line_distance(location, pixels, dirs, &inliers),
        initial_residual: rms_line_distance(initial, pixels, dirs, &inliers),
        inliers,
        iterations,
    })
}

/// RANSAC stream for one label; independent of evaluation order.
pub fn label_seed(seed: u64, label: u32) -> u64 {
    // splitmix64 finalizer over the pair.
    let mut z = seed ^ (label as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pixels and non-degenerate votes of one label.
#[derive(Debug, Clone, Default)]
pub struct LabelVotes {
    pub pixel_count: usize,
    pub pixels: Vec<Pixel>,
    pub dirs: Vec<Vector2<f64>>,
}

/// Groups foreground pixels by label, in row-major order.
pub fn group_votes(maps: &LandmarkMaps) -> Vec<(u32, LabelVotes)> {
    let mut groups: Vec<LabelVotes> = vec![LabelVotes::default(); maps.n as usize + 1];
    for (idx, (&l, v)) in maps.labels.iter().zip(&maps.votes).enumerate() {
        if l == 0 || l > maps.n {
            continue;
        }
        let g = &mut groups[l as usize];
        g.pixel_count += 1;
        if v[0] != 0.0 || v[1] != 0.0 {
            let d = Vector2::new(v[0] as f64, v[1] as f64);
            g.pixels.push(maps.pixel(idx));
            g.dirs.push(d / d.norm());
        }
    }
    groups
        .into_iter()
        .enumerate()
        .skip(1)
        .filter(|(_, g)| g.pixel_count > 0)
        .map(|(l, g)| (l as u32, g))
        .collect()
}

/// Detection of one label group: size filter, RANSAC, EM.
pub fn detect_label(
    label: u32,
    votes: &LabelVotes,
    params: &DetectParams,
    seed: u64,
    bounds: Option<ImageBounds>,
) -> Result<Refinement, Rejection> {
    if votes.pixel_count < params.min_patch_px {
        return Err(Rejection::TooSmall {
            pixels: votes.pixel_count,
            required: params.min_patch_px,
        });
    }
    let hyp = ransac_vote_intersection(&votes.pixels, &votes.dirs, params, label_seed(seed, label), bounds)?;
    em_refine(hyp.location, &votes.pixels, &votes.dirs, params)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionReport {
    /// Accepted landmarks, sorted by id.
    pub landmarks: Vec<DetectedLandmark>,
    /// Labels present in the map that were not accepted, sorted by id.
    pub rejected: Vec<(u32, Rejection)>,
}

impl DetectionReport {
    /// Rejections other than the size filter: groups large enough to vote
    /// whose votes did not agree.
    pub fn dropped(&self) -> usize {
        self.rejected
            .iter()
            .filter(|(_, r)| !matches!(r, Rejection::TooSmall { .. }))
            .count()
    }
}

pub fn detect_landmarks(maps: &LandmarkMaps, params: &DetectParams, seed: u64) -> Vec<DetectedLandmark> {
    detect_landmarks_report(maps, params, seed).landmarks
}

pub fn detect_landmarks_report(maps: &LandmarkMaps, params: &DetectParams, seed: u64) -> DetectionReport {
    let groups = group_votes(maps);
    let bounds = Some(ImageBounds {
        width: maps.width as f64,
        height: maps.height as f64,
    });
    let run = |(label, votes): &(u32, LabelVotes)| (*label, detect_label(*label, votes, params, seed, bounds));
    #[cfg(feature = "parallel")]
    let results: Vec<(u32, Result<Refinement, Rejection>)> = {
        use rayon::prelude::*;
        groups.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(u32, Result<Refinement, Rejection>)> = groups.iter().map(run).collect();

    let mut report = DetectionReport::default();
    for (label, r) in results {
        match r {
            Ok(refined) => report.landmarks.push(refined.into_detection(label)),
            Err(e) => report.rejected.push((label, e)),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn toward(target: Pixel, pixels: &[Pixel]) -> Vec<Vector2<f64>> {
        pixels
            .iter()
            .map(|p| (target.to_vector() - p.to_vector()).normalize())
            .collect()
    }

    fn ring(center: Pixel, count: usize, radius: f64) -> Vec<Pixel> {
        (0..count)
            .map(|i| {
                let a = i as f64 * 2.399963; // golden angle
                let r = radius * ((i as f64 + 0.5) / count as f64).sqrt();
                Pixel::new(center.u + r * a.cos(), center.v + r * a.sin())
            })
            .collect()
    }

    #[test]
    fn two_ray_examples() {
        let x = intersect_two_rays(
            Pixel::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Pixel::new(5.0, 5.0),
            Vector2::new(0.0, -1.0),
        )
        .unwrap();
        assert_eq!(x, Pixel::new(5.0, 0.0));
        assert!(intersect_two_rays(
            Pixel::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Pixel::new(0.0, 3.0),
            Vector2::new(1.0, 0.0)
        )
        .is_none());
    }

    #[test]
    fn least_squares_examples() {
        let x = least_squares_intersection(
            &[Pixel::new(0.0, 0.0), Pixel::new(10.0, 10.0)],
            &[Vector2::new(1.0, 0.0), Vector2::new(0.0, -1.0)],
        )
        .unwrap();
        assert!(x.distance(Pixel::new(10.0, 0.0)) < 1e-12);

        let target = Pixel::new(7.0, 3.0);
        let pixels = ring(Pixel::new(0.0, 0.0), 25, 40.0);
        let x = least_squares_intersection(&pixels, &toward(target, &pixels)).unwrap();
        assert!(x.distance(target) < 1e-9);

        let par = [Vector2::new(1.0, 0.0); 3];
        let pts = [Pixel::new(0.0, 0.0), Pixel::new(0.0, 1.0), Pixel::new(0.0, 2.0)];
        assert!(matches!(
            least_squares_intersection(&pts, &par),
            Err(IntersectError::IllConditioned(_))
        ));
        assert_eq!(
            least_squares_intersection(&pts[..1], &par[..1]),
            Err(IntersectError::TooFewVotes(1))
        );
    }

    #[test]
    fn ransac_on_exact_votes() {
        let target = Pixel::new(50.0, 50.0);
        let pixels = ring(Pixel::new(45.0, 52.0), 100, 25.0);
        let dirs = toward(target, &pixels);
        let hyp = ransac_vote_intersection(&pixels, &dirs, &DetectParams::default(), 1, None).unwrap();
        assert!(hyp.location.distance(target) < 1e-6);
        assert_eq!(hyp.support, 100);
        assert!(hyp.inliers.iter().all(|&b| b));
    }

    #[test]
    fn ransac_rejects_too_few_votes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pixels: Vec<Pixel> = (0..5)
            .map(|_| Pixel::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)))
            .collect();
        let dirs: Vec<Vector2<f64>> = (0..5)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..6.3);
                Vector2::new(a.cos(), a.sin())
            })
            .collect();
        assert!(matches!(
            ransac_vote_intersection(&pixels, &dirs, &DetectParams::default(), 0, None),
            Err(Rejection::InsufficientSupport { .. })
        ));
    }

    #[test]
    fn em_is_a_fixed_point_on_exact_votes() {
        let target = Pixel::new(20.0, 30.0);
        let pixels = ring(target, 80, 20.0);
        let dirs = toward(target, &pixels);
        let r = em_refine(target, &pixels, &dirs, &DetectParams::default()).unwrap();
        assert!(r.location.distance(target) < 1e-9);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn em_does_not_worsen_the_residual_under_noise() {
        let target = Pixel::new(100.0, 80.0);
        let noise = Normal::new(0.0, 2f64.to_radians()).unwrap();
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pixels = ring(Pixel::new(98.0, 83.0), 200, 25.0);
            let dirs: Vec<Vector2<f64>> = toward(target, &pixels)
                .into_iter()
                .map(|d| nalgebra::Rotation2::new(noise.sample(&mut rng)) * d)
                .collect();
            let params = DetectParams::default();
            let hyp = ransac_vote_intersection(&pixels, &dirs, &params, seed, None).unwrap();
            let r = em_refine(hyp.location, &pixels, &dirs, &params).unwrap();
            assert!(r.residual <= r.initial_residual + 1e-12, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn em_drops_mostly_random_patches() {
        let target = Pixel::new(60.0, 60.0);
        let mut dropped = 0;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pixels = ring(target, 150, 25.0);
            let dirs: Vec<Vector2<f64>> = toward(target, &pixels)
                .into_iter()
                .map(|d| {
                    if rng.random_bool(0.8) {
                        let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                        Vector2::new(a.cos(), a.sin())
                    } else {
                        d
                    }
                })
                .collect();
            let params = DetectParams::default();
            let label_votes = LabelVotes {
                pixel_count: pixels.len(),
                pixels,
                dirs,
            };
            if detect_label(1, &label_votes, &params, seed, None).is_err() {
                dropped += 1;
            }
        }
        assert!(dropped >= 19, "{dropped}");
    }

    #[test]
    fn detection_is_empty_on_background_and_honours_size_filter() {
        let params = DetectParams::default();
        let maps = LandmarkMaps::background(20, 20, 3);
        assert!(detect_landmarks(&maps, &params, 0).is_empty());

        // A patch of exactly T_s − 1 pixels with perfect votes.
        let mut maps = LandmarkMaps::background(20, 20, 3);
        let target = Pixel::new(10.0, 10.0);
        for idx in 0..params.min_patch_px - 1 {
            maps.labels[idx] = 2;
            maps.votes[idx] = crate::landmark::unit_vote(maps.pixel(idx), target);
        }
        let report = detect_landmarks_report(&maps, &params, 0);
        assert!(report.landmarks.is_empty());
        assert!(matches!(report.rejected[0], (2, Rejection::TooSmall { .. })));
        assert_eq!(report.dropped(), 0);
    }

    #[test]
    fn label_seeds_differ_per_label() {
        assert_ne!(label_seed(1, 2), label_seed(1, 3));
        assert_ne!(label_seed(1, 2), label_seed(2, 2));
    }
}
