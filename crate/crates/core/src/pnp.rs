//! Camera pose from 2D-3D correspondences: a normalized linear (DLT) solver,
//! Gauss-Newton refinement of the reprojection error on SE(3), and a seeded
//! RANSAC loop around both.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Matrix6, Rotation3, Vector2, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{nearest_rotation, CameraIntrinsics, Pixel, Point3, Pose};

/// Minimal sample size of the linear solver.
pub const MIN_SAMPLE: usize = 6;
const MIN_DEPTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub image: Pixel,
    pub world: Point3,
    pub landmark_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnPParams {
    pub reproj_thresh: f64,
    pub ransac_iters: usize,
    pub min_inliers: usize,
    pub refine_iters: usize,
}

impl Default for PnPParams {
    fn default() -> Self {
        Self {
            reproj_thresh: 3.0,
            ransac_iters: 512,
            min_inliers: 12,
            refine_iters: 20,
        }
    }
}

impl PnPParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.reproj_thresh > 0.0) {
            return Err(format!("reproj_thresh {} must be positive", self.reproj_thresh));
        }
        if self.ransac_iters == 0 || self.min_inliers == 0 || self.refine_iters == 0 {
            return Err("iteration and inlier counts must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose,
    pub inlier_ids: Vec<u32>,
    pub mean_reproj_error: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PnpError {
    #[error("need at least {MIN_SAMPLE} correspondences, got {0}")]
    NotEnoughPoints(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("no RANSAC sample produced a pose")]
    NoModel,
    #[error("only {found} inliers, {required} required")]
    InsufficientInliers { found: usize, required: usize },
}

/// Reprojection error in pixels; infinite for points at or behind the camera.
pub fn reprojection_error(pose: &Pose, k: &CameraIntrinsics, c: &Correspondence) -> f64 {
    let pc = pose.transform(&c.world);
    if pc.z <= MIN_DEPTH {
        return f64::INFINITY;
    }
    let u = k.fx * pc.x / pc.z + k.cx;
    let v = k.fy * pc.y / pc.z + k.cy;
    (u - c.image.u).hypot(v - c.image.v)
}

fn similarity_3d(points: &[Point3]) -> Matrix4<f64> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Point3>() / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { 3f64.sqrt() / mean_dist } else { 1.0 };
    let mut t = Matrix4::identity() * s;
    t[(3, 3)] = 1.0;
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-centroid * s));
    t
}

fn similarity_2d(points: &[Vector2<f64>]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { 2f64.sqrt() / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * centroid.x, 0.0, s, -s * centroid.y, 0.0, 0.0, 1.0)
}

/// Linear pose estimate from at least six correspondences.
///
/// Solves for the 3×4 matrix `[R | t]` (up to scale) in normalized camera
/// coordinates with Hartley-style conditioning of both point sets, then
/// projects its left 3×3 block onto SO(3).
pub fn dlt_pnp(corrs: &[Correspondence], k: &CameraIntrinsics) -> Result<Pose, PnpError> {
    let n = corrs.len();
    if n < MIN_SAMPLE {
        return Err(PnpError::NotEnoughPoints(n));
    }
    let rays: Vec<Vector2<f64>> = corrs
        .iter()
        .map(|c| {
            let r = k.unproject(c.image);
            Vector2::new(r.x, r.y)
        })
        .collect();
    let world: Vec<Point3> = corrs.iter().map(|c| c.world).collect();
    let t2 = similarity_2d(&rays);
    match point_spread(&world) {
        Spread::Degenerate => Err(PnpError::Degenerate),
        Spread::Planar { centroid, basis } => planar_pnp(&rays, &world, centroid, basis, t2),
        Spread::General => general_dlt(&rays, &world, t2),
        Spread::NearPlanar { centroid, basis } => {
            // Both models are plausible; keep the one that explains the
            // points better.
            let cost = |p: &Pose| objective(p, corrs, k);
            match (
                general_dlt(&rays, &world, t2),
                planar_pnp(&rays, &world, centroid, basis, t2),
            ) {
                (Ok(g), Ok(p)) => Ok(if cost(&g) <= cost(&p) { g } else { p }),
                (Ok(g), Err(_)) => Ok(g),
                (Err(_), planar) => planar,
            }
        }
    }
}

fn general_dlt(rays: &[Vector2<f64>], world: &[Point3], t2: Matrix3<f64>) -> Result<Pose, PnpError> {
    let n = rays.len();
    let t3 = similarity_3d(world);

    let mut a = DMatrix::<f64>::zeros(2 * n, 12);
    for (i, (ray, x)) in rays.iter().zip(world).enumerate() {
        let xh = t3 * x.push(1.0);
        let r = t2 * ray.push(1.0);
        let (u, v) = (r.x, r.y);
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -v * xh[j];
        }
    }
    let h = smallest_singular_vector(a, 12)?;
    let t2_inv = t2.try_inverse().ok_or(PnpError::Degenerate)?;
    let p_norm = Matrix3x4::from_iterator((0..12).map(|i| h[(i % 3) * 4 + i / 3]));
    let mut m: Matrix3x4<f64> = t2_inv * p_norm * t3;

    let mut block: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
    if block.determinant() < 0.0 {
        m = -m;
        block = -block;
    }
    let sv = block.singular_values();
    let scale = sv.sum() / 3.0;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(PnpError::Degenerate);
    }
    let rotation = nearest_rotation(&block);
    let translation: Vector3<f64> = m.column(3) / scale;
    Pose::new(rotation, translation).map_err(|_| PnpError::Degenerate)
}

/// Relative extent below which a principal axis of the 3D points counts as
/// flat.
const FLATNESS: f64 = 1e-6;
/// Relative extent below which the general solver is unreliable under noise.
const NEAR_FLATNESS: f64 = 0.05;

enum Spread {
    Degenerate,
    Planar { centroid: Point3, basis: Matrix3<f64> },
    NearPlanar { centroid: Point3, basis: Matrix3<f64> },
    General,
}

/// Classifies the 3D points by their principal extents. For planar sets the
/// basis columns are two in-plane axes and the normal.
fn point_spread(points: &[Point3]) -> Spread {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Point3>() / n;
    let cov = points
        .iter()
        .map(|p| (p - centroid) * (p - centroid).transpose())
        .sum::<Matrix3<f64>>()
        / n;
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let ext = order.map(|i| eig.eigenvalues[i].max(0.0).sqrt());
    if !(ext[0] > 0.0) || ext[1] / ext[0] < FLATNESS {
        return Spread::Degenerate;
    }
    let flat = ext[2] / ext[0];
    if flat >= NEAR_FLATNESS {
        return Spread::General;
    }
    let e1: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let e2: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let basis = Matrix3::from_columns(&[e1, e2, e1.cross(&e2)]);
    if flat < FLATNESS {
        Spread::Planar { centroid, basis }
    } else {
        Spread::NearPlanar { centroid, basis }
    }
}

/// Pose from coplanar points through the plane-to-image homography
/// `H ∝ [R·e1, R·e2, R·c + t]`.
fn planar_pnp(
    rays: &[Vector2<f64>],
    world: &[Point3],
    centroid: Point3,
    basis: Matrix3<f64>,
    t2: Matrix3<f64>,
) -> Result<Pose, PnpError> {
    let plane: Vec<Vector2<f64>> = world
        .iter()
        .map(|p| {
            let d = p - centroid;
            Vector2::new(d.dot(&basis.column(0)), d.dot(&basis.column(1)))
        })
        .collect();
    let tp = similarity_2d(&plane);
    let n = rays.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for (i, (ray, q)) in rays.iter().zip(&plane).enumerate() {
        let qh = tp * q.push(1.0);
        let r = t2 * ray.push(1.0);
        for j in 0..3 {
            a[(2 * i, j)] = qh[j];
            a[(2 * i, 6 + j)] = -r.x * qh[j];
            a[(2 * i + 1, 3 + j)] = qh[j];
            a[(2 * i + 1, 6 + j)] = -r.y * qh[j];
        }
    }
    let h = smallest_singular_vector(a, 9)?;
    let h_norm = Matrix3::from_iterator((0..9).map(|i| h[(i % 3) * 3 + i / 3]));
    let t2_inv = t2.try_inverse().ok_or(PnpError::Degenerate)?;
    let hm = t2_inv * h_norm * tp;
    let (h1, h2, h3) = (hm.column(0), hm.column(1), hm.column(2));
    let mut lambda = 2.0 / (h1.norm() + h2.norm());
    // The plane centroid must lie in front of the camera.
    if h3.z < 0.0 {
        lambda = -lambda;
    }
    let r1: Vector3<f64> = h1 * lambda;
    let r2: Vector3<f64> = h2 * lambda;
    let m = Matrix3::from_columns(&[r1, r2, r1.cross(&r2)]);
    let rotation = nearest_rotation(&m) * basis.transpose();
    let translation: Vector3<f64> = h3 * lambda - rotation * centroid;
    Pose::new(rotation, translation).map_err(|_| PnpError::Degenerate)
}

/// Null vector of `a`, rejecting systems whose second-smallest singular
/// value is negligible (more than one solution).
fn smallest_singular_vector(a: DMatrix<f64>, cols: usize) -> Result<Vec<f64>, PnpError> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(PnpError::Degenerate)?;
    let sv = &svd.singular_values;
    if sv.len() < cols {
        return Err(PnpError::Degenerate);
    }
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (second, largest) = (sv[order[1]], sv[order[cols - 1]]);
    if !(largest > 0.0) || second / largest < 1e-8 {
        return Err(PnpError::Degenerate);
    }
    Ok(v_t.row(order[0]).iter().copied().collect())
}

fn objective(pose: &Pose, corrs: &[Correspondence], k: &CameraIntrinsics) -> f64 {
    corrs.iter().map(|c| reprojection_error(pose, k, c).powi(2)).sum()
}

/// Left-multiplicative SE(3) update: `x_cam ↦ Exp(ω)·x_cam + v`.
fn apply_increment(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let rot = Rotation3::new(Vector3::new(delta[0], delta[1], delta[2])).into_inner();
    Pose {
        rotation: nearest_rotation(&(rot * pose.rotation)),
        translation: rot * pose.translation + Vector3::new(delta[3], delta[4], delta[5]),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub pose: Pose,
    /// Objective value before the first and after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Gauss-Newton on the summed squared reprojection error.
///
/// Stops when the step norm drops below 1e-10, after `iters` iterations, or
/// when ten step halvings fail to reduce the objective. Returns the input
/// unchanged if the normal equations are singular.
pub fn gauss_newton_refine(pose: &Pose, corrs: &[Correspondence], k: &CameraIntrinsics, iters: usize) -> Pose {
    gauss_newton_trace(pose, corrs, k, iters).pose
}

pub fn gauss_newton_trace(pose: &Pose, corrs: &[Correspondence], k: &CameraIntrinsics, iters: usize) -> Refined {
    let mut current = *pose;
    let mut cost = objective(&current, corrs, k);
    let mut trace = vec![cost];
    if !cost.is_finite() {
        return Refined {
            pose: current,
            objective_trace: trace,
        };
    }
    for _ in 0..iters {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for c in corrs {
            let pc = current.transform(&c.world);
            let z = pc.z;
            let r = Vector2::new(k.fx * pc.x / z + k.cx - c.image.u, k.fy * pc.y / z + k.cy - c.image.v);
            let dproj = nalgebra::Matrix2x3::new(
                k.fx / z,
                0.0,
                -k.fx * pc.x / (z * z),
                0.0,
                k.fy / z,
                -k.fy * pc.y / (z * z),
            );
            // d x_cam / d(ω, v) = [−[x_cam]× | I]
            let mut dpc = nalgebra::Matrix3x6::<f64>::zeros();
            dpc.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-pc.cross_matrix()));
            dpc.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
            let j = dproj * dpc;
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let Some(chol) = h.cholesky() else {
            break;
        };
        let mut delta = -chol.solve(&g);
        if !delta.iter().all(|x| x.is_finite()) || delta.norm() < 1e-10 {
            break;
        }
        let mut accepted = None;
        for _ in 0..=10 {
            let candidate = apply_increment(&current, &delta);
            let c = objective(&candidate, corrs, k);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            delta *= 0.5;
        }
        let Some((next, c)) = accepted else {
            break;
        };
        current = next;
        cost = c;
        trace.push(cost);
    }
    Refined {
        pose: current,
        objective_trace: trace,
    }
}

fn inliers(pose: &Pose, corrs: &[Correspondence], k: &CameraIntrinsics, thresh: f64) -> Vec<usize> {
    corrs
        .iter()
        .enumerate()
        .filter(|(_, c)| reprojection_error(pose, k, c) <= thresh)
        .map(|(i, _)| i)
        .collect()
}

fn subset(corrs: &[Correspondence], idx: &[usize]) -> Vec<Correspondence> {
    idx.iter().map(|&i| corrs[i]).collect()
}

/// Rounds needed to draw one all-inlier sample with 99.9% confidence.
fn adaptive_rounds(inlier_ratio: f64) -> usize {
    let w = inlier_ratio.powi(MIN_SAMPLE as i32);
    if w >= 1.0 {
        return 1;
    }
    if w <= 0.0 {
        return usize::MAX;
    }
    let rounds = ((1.0f64 - 0.999).ln() / (-w).ln_1p()).ceil();
    if rounds.is_finite() {
        rounds.max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// RANSAC over 6-point DLT samples, then Gauss-Newton on the consensus set,
/// inlier re-selection, and a second refinement. Rounds stop early once the
/// best consensus makes further sampling pointless at 99.9% confidence; the
/// lowest round wins ties.
pub fn ransac_pnp(
    corrs: &[Correspondence],
    k: &CameraIntrinsics,
    params: &PnPParams,
    seed: u64,
) -> Result<PoseEstimate, PnpError> {
    let n = corrs.len();
    if n < MIN_SAMPLE {
        return Err(PnpError::NotEnoughPoints(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Pose)> = None;
    let mut budget = params.ransac_iters;
    let mut round = 0;
    while round < budget {
        round += 1;
        let sample = rand::seq::index::sample(&mut rng, n, MIN_SAMPLE);
        let picked: Vec<Correspondence> = sample.iter().map(|i| corrs[i]).collect();
        let Ok(pose) = dlt_pnp(&picked, k) else {
            continue;
        };
        let count = corrs
            .iter()
            .filter(|c| reprojection_error(&pose, k, c) <= params.reproj_thresh)
            .count();
        if best.as_ref().is_none_or(|(b, _)| count > *b) {
            best = Some((count, pose));
            budget = budget.min(adaptive_rounds(count as f64 / n as f64));
        }
    }
    let (_, pose) = best.ok_or(PnpError::NoModel)?;

    let first = inliers(&pose, corrs, k, params.reproj_thresh);
    let pose = if first.len() >= MIN_SAMPLE {
        gauss_newton_refine(&pose, &subset(corrs, &first), k, params.refine_iters)
    } else {
        pose
    };
    let second = inliers(&pose, corrs, k, params.reproj_thresh);
    let pose = if second.len() >= MIN_SAMPLE {
        gauss_newton_refine(&pose, &subset(corrs, &second), k, params.refine_iters)
    } else {
        pose
    };
    let last = inliers(&pose, corrs, k, params.reproj_thresh);
    if last.len() < params.min_inliers {
        return Err(PnpError::InsufficientInliers {
            found: last.len(),
            required: params.min_inliers,
        });
    }
    let mean_reproj_error = last
        .iter()
        .map(|&i| reprojection_error(&pose, k, &corrs[i]))
        .sum::<f64>()
        / last.len() as f64;
    Ok(PoseEstimate {
        pose,
        inlier_ids: last.iter().map(|&i| corrs[i].landmark_id).collect(),
        mean_reproj_error,
    })
}
