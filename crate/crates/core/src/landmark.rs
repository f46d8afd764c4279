//! Surface over-segmentation into patches, patch-centroid landmarks, and
//! rendering of per-view ground-truth segmentation and voting maps.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{project, CameraIntrinsics, Pixel, Point3, Pose};

/// Default patch size for room-scale scenes (meters).
pub const ROOM_PATCH_SIZE: f64 = 0.15;
/// Default patch size for building-scale scenes (meters).
pub const BUILDING_PATCH_SIZE: f64 = 1.75;
pub const DEFAULT_SPLAT_RADIUS: u32 = 2;

/// Distance below which a pixel is considered to sit on its landmark's
/// projection and receives no vote.
pub const DEGENERATE_VOTE_DIST: f64 = 1e-6;

const MAX_LLOYD_ITERS: usize = 20;
const LLOYD_CHANGE_FRAC: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandmarkError {
    #[error("surface cloud is empty")]
    EmptyCloud,
    #[error("surface cloud contains a non-finite point at index {0}")]
    NonFinitePoint(usize),
    #[error("target patch size must be positive, got {0}")]
    InvalidPatchSize(f64),
    #[error("target patch size {size} m exceeds the cloud's bounding-box diagonal {diagonal} m")]
    PatchSizeExceedsExtent { size: f64, diagonal: f64 },
    #[error("patch labels do not match the cloud: {0}")]
    InconsistentPatches(String),
    #[error("splat radius must be at least 1")]
    InvalidSplatRadius,
    #[error("no surface point projects into the image")]
    EmptyView,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCloud {
    pub points: Vec<Point3>,
    pub normals: Option<Vec<Vector3<f64>>>,
}

impl SurfaceCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self, LandmarkError> {
        if points.is_empty() {
            return Err(LandmarkError::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(LandmarkError::NonFinitePoint(i));
        }
        Ok(Self { points, normals: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> (Point3, Point3) {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

/// Per-point patch labels in `1..=patch_count`. Label 0 is reserved for
/// background and never assigned to a surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub labels: Vec<u32>,
    pub patch_count: u32,
    pub target_size: f64,
}

impl PatchSet {
    /// Number of points in each patch, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.patch_count as usize];
        for &l in &self.labels {
            sizes[l as usize - 1] += 1;
        }
        sizes
    }

    pub fn validate(&self, cloud: &SurfaceCloud) -> Result<(), LandmarkError> {
        if self.labels.len() != cloud.len() {
            return Err(LandmarkError::InconsistentPatches(format!(
                "{} labels for {} points",
                self.labels.len(),
                cloud.len()
            )));
        }
        let mut seen = vec![false; self.patch_count as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            if l == 0 || l > self.patch_count {
                return Err(LandmarkError::InconsistentPatches(format!(
                    "point {i} has label {l} outside 1..={}",
                    self.patch_count
                )));
            }
            seen[l as usize - 1] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(LandmarkError::InconsistentPatches(format!(
                "patch {} owns no points",
                j + 1
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u32,
    pub position: Point3,
}

/// Landmarks with ids exactly `1..=n`, stored in id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    pub landmarks: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Landmark> {
        let idx = (id as usize).checked_sub(1)?;
        self.landmarks.get(idx).filter(|l| l.id == id)
    }
}

/// Per-view segmentation labels and unit voting directions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkMaps {
    pub height: u32,
    pub width: u32,
    /// Number of landmark classes; labels range over `0..=n`.
    pub n: u32,
    pub labels: Vec<u32>,
    pub votes: Vec<[f32; 2]>,
}

impl LandmarkMaps {
    pub fn background(height: u32, width: u32, n: u32) -> Self {
        let len = height as usize * width as usize;
        Self {
            height,
            width,
            n,
            labels: vec![0; len],
            votes: vec![[0.0; 2]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    /// Pixel coordinate of a row-major index.
    pub fn pixel(&self, idx: usize) -> Pixel {
        let w = self.width as usize;
        Pixel::new((idx % w) as f64, (idx / w) as f64)
    }

    pub fn label(&self, u: u32, v: u32) -> u32 {
        self.labels[self.index(u, v)]
    }

    pub fn vote(&self, u: u32, v: u32) -> [f32; 2] {
        self.votes[self.index(u, v)]
    }

    pub fn foreground_fraction(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l != 0).count() as f64 / self.labels.len() as f64
    }

    /// Labels with at least one pixel, ascending, background excluded.
    pub fn active_labels(&self) -> Vec<u32> {
        let mut present = vec![false; self.n as usize + 1];
        for &l in &self.labels {
            if let Some(p) = present.get_mut(l as usize) {
                *p = true;
            }
        }
        (1..=self.n).filter(|&l| present[l as usize]).collect()
    }

    /// Checks the background/unit-vote invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, (&l, v)) in self.labels.iter().zip(&self.votes).enumerate() {
            let norm = (v[0] as f64).hypot(v[1] as f64);
            if l > self.n {
                return Err(format!("pixel {i}: label {l} exceeds n={}", self.n));
            }
            if l == 0 && norm != 0.0 {
                return Err(format!("pixel {i}: background pixel carries a vote"));
            }
            if l != 0 && norm != 0.0 && (norm - 1.0).abs() > 1e-6 {
                return Err(format!("pixel {i}: vote norm {norm}"));
            }
        }
        Ok(())
    }
}

/// Seeded k-means over 3D positions.
///
/// Seeds are placed one per occupied cell of a regular grid whose spacing is
/// `target_size` (adjusted so each bounding-box axis holds a whole number of
/// cells), at a seeded-random member point of that cell. Lloyd iterations then
/// run until fewer than 0.1% of labels change or 20 iterations pass. As in
/// supervoxel clustering, each point only competes among centers in the 27
/// grid cells around it.
pub fn oversegment(cloud: &SurfaceCloud, target_size: f64, seed: u64) -> Result<PatchSet, LandmarkError> {
    if cloud.is_empty() {
        return Err(LandmarkError::EmptyCloud);
    }
    if !(target_size > 0.0) || !target_size.is_finite() {
        return Err(LandmarkError::InvalidPatchSize(target_size));
    }
    let (lo, hi) = cloud.bounds();
    let diagonal = (hi - lo).norm();
    if diagonal > 0.0 && target_size > diagonal {
        return Err(LandmarkError::PatchSizeExceedsExtent {
            size: target_size,
            diagonal,
        });
    }

    let grid = Grid::new(lo, hi, target_size);
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        cells.entry(grid.cell(p)).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Point3> = cells
        .values()
        .map(|members| cloud.points[members[rng.random_range(0..members.len())]])
        .collect();

    let mut assign = vec![u32::MAX; cloud.len()];
    for _ in 0..MAX_LLOYD_ITERS {
        let index = CenterIndex::build(&grid, &centers);
        let next = assign_points(&cloud.points, &centers, &index, &grid);
        let changed = next.iter().zip(&assign).filter(|(a, b)| a != b).count();
        assign = next;

        let mut sums = vec![Vector3::zeros(); centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (p, &c) in cloud.points.iter().zip(&assign) {
            sums[c as usize] += p;
            counts[c as usize] += 1;
        }
        for ((c, s), &n) in centers.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                *c = s / n as f64;
            }
        }
        if (changed as f64) < LLOYD_CHANGE_FRAC * cloud.len() as f64 {
            break;
        }
    }

    // Compact cluster ids into 1..=n, dropping empty clusters.
    let mut remap = vec![0u32; centers.len()];
    for &c in &assign {
        remap[c as usize] = 1;
    }
    let mut next_id = 0u32;
    for r in remap.iter_mut() {
        if *r != 0 {
            next_id += 1;
            *r = next_id;
        }
    }
    Ok(PatchSet {
        labels: assign.iter().map(|&c| remap[c as usize]).collect(),
        patch_count: next_id,
        target_size,
    })
}

#[derive(Debug, Clone, Copy)]
struct Grid {
    origin: Point3,
    cell: Vector3<f64>,
    dims: [i64; 3],
}

impl Grid {
    fn new(lo: Point3, hi: Point3, size: f64) -> Self {
        let mut cell = Vector3::repeat(size);
        let mut dims = [1i64; 3];
        for a in 0..3 {
            let extent = hi[a] - lo[a];
            let n = (extent / size).round().max(1.0);
            dims[a] = n as i64;
            if extent > 0.0 {
                cell[a] = extent / n;
            }
        }
        Self { origin: lo, cell, dims }
    }

    fn cell(&self, p: &Point3) -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..3 {
            let i = ((p[a] - self.origin[a]) / self.cell[a]).floor() as i64;
            c[a] = i.clamp(0, self.dims[a] - 1);
        }
        c
    }
}

struct CenterIndex {
    cells: BTreeMap<[i64; 3], Vec<u32>>,
}

impl CenterIndex {
    fn build(grid: &Grid, centers: &[Point3]) -> Self {
        let mut cells: BTreeMap<[i64; 3], Vec<u32>> = BTreeMap::new();
        for (i, c) in centers.iter().enumerate() {
            cells.entry(grid.cell(c)).or_default().push(i as u32);
        }
        Self { cells }
    }

    fn nearest(&self, p: &Point3, cell: [i64; 3], centers: &[Point3]) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                    for &c in self.cells.get(&key).into_iter().flatten() {
                        let d = (centers[c as usize] - p).norm_squared();
                        if best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
                            best = Some((d, c));
                        }
                    }
                }
            }
        }
        best.map(|(_, c)| c)
    }
}

fn nearest_brute(p: &Point3, centers: &[Point3]) -> u32 {
    let mut best = (f64::INFINITY, 0u32);
    for (i, c) in centers.iter().enumerate() {
        let d = (c - p).norm_squared();
        if d < best.0 {
            best = (d, i as u32);
        }
    }
    best.1
}

fn assign_points(points: &[Point3], centers: &[Point3], index: &CenterIndex, grid: &Grid) -> Vec<u32> {
    let assign_one = |p: &Point3| {
        index
            .nearest(p, grid.cell(p), centers)
            .unwrap_or_else(|| nearest_brute(p, centers))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(assign_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(assign_one).collect()
    }
}

/// Landmark `j` is the arithmetic centroid of the points labeled `j`.
pub fn landmarks_from_patches(cloud: &SurfaceCloud, patches: &PatchSet) -> Result<LandmarkSet, LandmarkError> {
    patches.validate(cloud)?;
    let n = patches.patch_count as usize;
    let mut sums = vec![Vector3::zeros(); n];
    let mut counts = vec![0usize; n];
    for (p, &l) in cloud.points.iter().zip(&patches.labels) {
        sums[l as usize - 1] += p;
        counts[l as usize - 1] += 1;
    }
    Ok(LandmarkSet {
        landmarks: sums
            .iter()
            .zip(&counts)
            .enumerate()
            .map(|(j, (s, &c))| Landmark {
                id: j as u32 + 1,
                position: s / c as f64,
            })
            .collect(),
    })
}

/// Maps plus the index of the surface point visible at each pixel
/// (`u32::MAX` where nothing is visible) and its camera-frame depth.
#[derive(Debug, Clone)]
pub struct RenderedView {
    pub maps: LandmarkMaps,
    pub point_index: Vec<u32>,
    pub depth: Vec<f64>,
    /// Projection of every landmark (index `id - 1`); `None` when the
    /// landmark is behind the camera.
    pub projections: Vec<Option<Pixel>>,
}

pub fn render_gt_maps(
    cloud: &SurfaceCloud,
    patches: &PatchSet,
    lms: &LandmarkSet,
    k: &CameraIntrinsics,
    pose: &Pose,
    splat_radius: u32,
) -> Result<LandmarkMaps, LandmarkError> {
    render_view(cloud, patches, lms, k, pose, splat_radius).map(|v| v.maps)
}

/// Z-buffer point splatting followed by per-pixel vote computation.
///
/// Each point in front of the camera covers the disc of pixels within
/// `splat_radius` of its rounded projection; the nearest point wins, ties go
/// to the lower point index. Pixel `i` labeled `j` votes
/// `(l_j − p_i) / ‖l_j − p_i‖` toward the projection `l_j` of landmark `j`.
pub fn render_view(
    cloud: &SurfaceCloud,
    patches: &PatchSet,
    lms: &LandmarkSet,
    k: &CameraIntrinsics,
    pose: &Pose,
    splat_radius: u32,
) -> Result<RenderedView, LandmarkError> {
    if splat_radius < 1 {
        return Err(LandmarkError::InvalidSplatRadius);
    }
    patches.validate(cloud)?;
    if lms.len() != patches.patch_count as usize {
        return Err(LandmarkError::InconsistentPatches(format!(
            "{} landmarks for {} patches",
            lms.len(),
            patches.patch_count
        )));
    }
    let (depth, point_index) = splat(cloud, k, pose, splat_radius);
    if point_index.iter().all(|&i| i == u32::MAX) {
        return Err(LandmarkError::EmptyView);
    }

    // Landmarks behind the camera have no meaningful projection; their
    // pixels keep the label but carry no vote.
    let projections: Vec<Option<Pixel>> = lms
        .landmarks
        .iter()
        .map(|lm| {
            let (px, z) = project(&lm.position, k, pose);
            (z > 1e-9).then_some(px)
        })
        .collect();

    let width = k.width as usize;
    let shade = |(idx, &pi): (usize, &u32)| -> (u32, [f32; 2]) {
        if pi == u32::MAX {
            return (0, [0.0; 2]);
        }
        let label = patches.labels[pi as usize];
        let vote = match projections[label as usize - 1] {
            Some(l) => {
                let p = Pixel::new((idx % width) as f64, (idx / width) as f64);
                unit_vote(p, l)
            }
            None => [0.0; 2],
        };
        (label, vote)
    };
    #[cfg(feature = "parallel")]
    let shaded: Vec<(u32, [f32; 2])> = {
        use rayon::prelude::*;
        point_index.par_iter().enumerate().map(shade).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let shaded: Vec<(u32, [f32; 2])> = point_index.iter().enumerate().map(shade).collect();
    let (labels, votes) = shaded.into_iter().unzip();

    Ok(RenderedView {
        maps: LandmarkMaps {
            height: k.height,
            width: k.width,
            n: patches.patch_count,
            labels,
            votes,
        },
        point_index,
        depth,
        projections,
    })
}

/// Z-buffer of `cloud` seen from `pose`: per-pixel depth and index of the
/// nearest point whose splat disc covers the pixel (`u32::MAX` if none).
pub fn splat(cloud: &SurfaceCloud, k: &CameraIntrinsics, pose: &Pose, splat_radius: u32) -> (Vec<f64>, Vec<u32>) {
    let (w, h) = (k.width as i64, k.height as i64);
    let len = (w * h) as usize;
    let mut depth = vec![f64::INFINITY; len];
    let mut point_index = vec![u32::MAX; len];
    let r = splat_radius as i64;
    let r2 = r * r;

    for (i, p) in cloud.points.iter().enumerate() {
        let (px, z) = project(p, k, pose);
        if !(z > 1e-9) || !px.is_finite() {
            continue;
        }
        let (cu, cv) = (px.u.round(), px.v.round());
        if cu < -(r as f64) || cv < -(r as f64) || cu > (w + r) as f64 || cv > (h + r) as f64 {
            continue;
        }
        let (cu, cv) = (cu as i64, cv as i64);
        for dv in -r..=r {
            let v = cv + dv;
            if v < 0 || v >= h {
                continue;
            }
            for du in -r..=r {
                let u = cu + du;
                if u < 0 || u >= w || du * du + dv * dv > r2 {
                    continue;
                }
                let idx = (v * w + u) as usize;
                if z < depth[idx] {
                    depth[idx] = z;
                    point_index[idx] = i as u32;
                }
            }
        }
    }
    (depth, point_index)
}

/// Unit direction from `p` toward `target`, `None` when they coincide.
pub fn vote_direction(p: Pixel, target: Pixel) -> Option<Vector2<f64>> {
    let d = Vector2::new(target.u - p.u, target.v - p.v);
    let norm = d.norm();
    (norm >= DEGENERATE_VOTE_DIST).then(|| d / norm)
}

/// [`vote_direction`] at storage precision, zero when degenerate.
pub fn unit_vote(p: Pixel, target: Pixel) -> [f32; 2] {
    vote_direction(p, target).map_or([0.0; 2], |d| [d.x as f32, d.y as f32])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn plane_grid(n: usize, extent: f64) -> SurfaceCloud {
        let step = extent / (n - 1) as f64;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point3::new(i as f64 * step, j as f64 * step, 0.0));
            }
        }
        SurfaceCloud::new(pts).unwrap()
    }

    #[test]
    fn unit_plane_splits_into_about_sixteen_patches() {
        let cloud = plane_grid(41, 1.0);
        let patches = oversegment(&cloud, 0.25, 7).unwrap();
        patches.validate(&cloud).unwrap();
        assert!((12..=20).contains(&patches.patch_count), "{}", patches.patch_count);

        let sizes = patches.sizes();
        let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
        let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / sizes.len() as f64;
        assert!(var.sqrt() / mean < 0.5, "cv {}", var.sqrt() / mean);

        // Equivalent diameter sqrt(area) of each patch.
        let cell_area = (1.0 / 40.0f64).powi(2);
        let mean_diam = sizes.iter().map(|&s| (s as f64 * cell_area).sqrt()).sum::<f64>() / sizes.len() as f64;
        assert!((mean_diam - 0.25).abs() <= 0.125, "{mean_diam}");
    }

    #[test]
    fn single_point_cloud_is_one_patch() {
        let cloud = SurfaceCloud::new(vec![Point3::new(1.0, 2.0, 3.0)]).unwrap();
        let patches = oversegment(&cloud, 5.0, 0).unwrap();
        assert_eq!(patches.patch_count, 1);
        let lms = landmarks_from_patches(&cloud, &patches).unwrap();
        assert_eq!(lms.landmarks[0].position, Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn oversegment_is_deterministic_and_rejects_oversized_patches() {
        let cloud = plane_grid(21, 1.0);
        let a = oversegment(&cloud, 0.2, 3).unwrap();
        let b = oversegment(&cloud, 0.2, 3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            oversegment(&cloud, 2.0, 3),
            Err(LandmarkError::PatchSizeExceedsExtent { .. })
        ));
        assert!(matches!(
            oversegment(&cloud, 0.0, 3),
            Err(LandmarkError::InvalidPatchSize(_))
        ));
        assert_eq!(SurfaceCloud::new(vec![]), Err(LandmarkError::EmptyCloud));
    }

    #[test]
    fn centroid_of_two_points() {
        let cloud = SurfaceCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)]).unwrap();
        let patches = PatchSet {
            labels: vec![1, 1],
            patch_count: 1,
            target_size: 1.0,
        };
        let lms = landmarks_from_patches(&cloud, &patches).unwrap();
        assert_eq!(lms.landmarks[0].position, Point3::new(1.0, 0.0, 0.0));
        assert_eq!(lms.get(1).unwrap().id, 1);
        assert!(lms.get(0).is_none() && lms.get(2).is_none());
    }

    #[test]
    fn vote_examples() {
        assert_eq!(unit_vote(Pixel::new(10.0, 0.0), Pixel::new(10.0, 10.0)), [0.0, 1.0]);
        let v = unit_vote(Pixel::new(10.0, 0.0), Pixel::new(13.0, 4.0));
        assert!((v[0] - 0.6).abs() < 1e-7 && (v[1] - 0.8).abs() < 1e-7);
        assert_eq!(unit_vote(Pixel::new(10.0, 0.0), Pixel::new(10.0, 0.0)), [0.0, 0.0]);
    }

    fn wall_scene() -> (SurfaceCloud, PatchSet, LandmarkSet, CameraIntrinsics, Pose) {
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                pts.push(Point3::new(i as f64 * 0.02 - 0.6, j as f64 * 0.02 - 0.6, 0.0));
            }
        }
        let cloud = SurfaceCloud::new(pts).unwrap();
        let patches = oversegment(&cloud, 0.2, 1).unwrap();
        let lms = landmarks_from_patches(&cloud, &patches).unwrap();
        let k = CameraIntrinsics::new(60.0, 60.0, 32.0, 32.0, 64, 64).unwrap();
        let pose = Pose::look_at(Point3::new(0.1, 0.2, -1.2), Point3::new(0.0, 0.0, 0.0), Vector3::y()).unwrap();
        (cloud, patches, lms, k, pose)
    }

    #[test]
    fn rendered_votes_point_at_landmark_projections() {
        let (cloud, patches, lms, k, pose) = wall_scene();
        let view = render_view(&cloud, &patches, &lms, &k, &pose, 2).unwrap();
        let maps = &view.maps;
        maps.check_invariants().unwrap();
        assert!(maps.foreground_fraction() > 0.5);
        for idx in 0..maps.len() {
            let l = maps.labels[idx];
            if l == 0 {
                continue;
            }
            let p = maps.pixel(idx);
            let target = view.projections[l as usize - 1].unwrap();
            let d = maps.votes[idx];
            if d == [0.0, 0.0] {
                assert!(p.distance(target) < DEGENERATE_VOTE_DIST);
                continue;
            }
            // The exact direction passes within 1e-6 px of the landmark and
            // the stored vote is its f32 rounding.
            let exact = vote_direction(p, target).unwrap();
            let (dx, dy) = (target.u - p.u, target.v - p.v);
            let along = dx * exact.x + dy * exact.y;
            let perp = (dx * exact.y - dy * exact.x).abs();
            assert!(along > 0.0);
            assert!(perp < 1e-6, "perp {perp} at distance {along}");
            assert_eq!(d, [exact.x as f32, exact.y as f32]);
        }
    }

    #[test]
    fn landmark_ids_agree_across_views() {
        let (cloud, patches, lms, k, pose) = wall_scene();
        let other = Pose::look_at(Point3::new(-0.2, 0.0, -1.0), Point3::new(0.05, 0.0, 0.0), Vector3::y()).unwrap();
        let a = render_view(&cloud, &patches, &lms, &k, &pose, 2).unwrap();
        let b = render_view(&cloud, &patches, &lms, &k, &other, 2).unwrap();
        // A surface point seen in both views carries the same label in both.
        let mut label_a = vec![None; cloud.len()];
        for (idx, &pi) in a.point_index.iter().enumerate() {
            if pi != u32::MAX {
                label_a[pi as usize] = Some(a.maps.labels[idx]);
            }
        }
        let mut shared = 0;
        for (idx, &pi) in b.point_index.iter().enumerate() {
            if pi != u32::MAX {
                if let Some(l) = label_a[pi as usize] {
                    assert_eq!(l, b.maps.labels[idx]);
                    shared += 1;
                }
            }
        }
        assert!(shared > 100);
    }

    #[test]
    fn empty_view_is_an_error() {
        let (cloud, patches, lms, k, _) = wall_scene();
        let away = Pose::look_at(Point3::new(0.0, 0.0, -1.0), Point3::new(0.0, 0.0, -3.0), Vector3::y()).unwrap();
        assert_eq!(
            render_gt_maps(&cloud, &patches, &lms, &k, &away, 2).unwrap_err(),
            LandmarkError::EmptyView
        );
        assert_eq!(
            render_gt_maps(&cloud, &patches, &lms, &k, &away, 0).unwrap_err(),
            LandmarkError::InvalidSplatRadius
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn centroids_match_direct_summation(
                pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..60),
                n in 1u32..6,
                salt in any::<u64>(),
            ) {
                let n = n.min(pts.len() as u32);
                // Every patch gets at least one point: first n points seed the labels.
                let labels: Vec<u32> = (0..pts.len())
                    .map(|i| if (i as u32) < n { i as u32 + 1 } else { (salt.wrapping_mul(i as u64 + 1) >> 7) as u32 % n + 1 })
                    .collect();
                let cloud = SurfaceCloud::new(pts.iter().map(|p| Point3::from(*p)).collect()).unwrap();
                let patches = PatchSet { labels: labels.clone(), patch_count: n, target_size: 1.0 };
                let lms = landmarks_from_patches(&cloud, &patches).unwrap();
                for j in 1..=n {
                    let members: Vec<&[f64; 3]> = pts.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(p, _)| p).collect();
                    for a in 0..3 {
                        let mean = members.iter().map(|p| p[a]).sum::<f64>() / members.len() as f64;
                        prop_assert!((lms.landmarks[j as usize - 1].position[a] - mean).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
