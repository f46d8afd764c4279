//! Pinhole camera model, rigid world-to-camera poses and pose-error metrics.
//!
//! Poses map world points into the camera frame: `x_cam = R * x_world + t`.
//! The camera looks along `+z`, with `x` to the right and `y` down, so pixel
//! coordinates are `u = fx * x / z + cx`, `v = fy * y / z + cy`.

use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector2, Vector3};
use thiserror::Error;

pub type Point3 = Vector3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1`.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal (deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Continuous image coordinate. Integer values address pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }

    pub fn from_vector(v: Vector2<f64>) -> Self {
        Self { u: v.x, v: v.y }
    }

    pub fn distance(self, other: Pixel) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Ray direction (unnormalized, z = 1) through a pixel in camera coordinates.
    pub fn unproject(&self, p: Pixel) -> Vector3<f64> {
        Vector3::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < self.width as f64 && p.v < self.height as f64
    }

    /// Image diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose, re-orthonormalizing the rotation if it drifted by more
    /// than [`ROTATION_TOL`] but still resembles a rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if rotation.iter().chain(translation.iter()).any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let dev = rotation_deviation(&rotation);
        let rotation = if dev <= ROTATION_TOL {
            rotation
        } else if dev < 1e-2 {
            nearest_rotation(&rotation)
        } else {
            return Err(GeometryError::NotOrthonormal(dev));
        };
        Ok(Self { rotation, translation })
    }

    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::new(axis_angle).into_inner(),
            translation,
        }
    }

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// should appear upward in the image.
    pub fn look_at(eye: Point3, target: Point3, up: Vector3<f64>) -> Option<Self> {
        let forward = (target - eye).try_normalize(1e-12)?;
        let right = forward.cross(&up).try_normalize(1e-9)?;
        let down = forward.cross(&right);
        // Rows are the camera axes expressed in world coordinates.
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Some(Self { rotation, translation })
    }

    pub fn transform(&self, p: &Point3) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn matrix(&self) -> Matrix3x4<f64> {
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.set_column(3, &self.translation);
        m
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: renormalize(self.rotation * other.rotation),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn is_valid(&self) -> bool {
        rotation_deviation(&self.rotation) <= ROTATION_TOL
    }
}

/// `a ∘ b`: apply `b` first, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn invert(a: &Pose) -> Pose {
    a.inverse()
}

/// Max of `‖RᵀR − I‖∞` and `|det R − 1|`.
pub fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    ortho.max((r.determinant() - 1.0).abs())
}

/// Polar-decomposition projection onto SO(3).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

fn renormalize(r: Matrix3<f64>) -> Matrix3<f64> {
    if rotation_deviation(&r) > ROTATION_TOL {
        nearest_rotation(&r)
    } else {
        r
    }
}

/// Pinhole projection; returns the pixel and the camera-frame depth. The
/// pixel is meaningless when depth is not positive.
pub fn project(point: &Point3, k: &CameraIntrinsics, pose: &Pose) -> (Pixel, f64) {
    let pc = pose.transform(point);
    let z = pc.z;
    (Pixel::new(k.fx * pc.x / z + k.cx, k.fy * pc.y / z + k.cy), z)
}

/// World point at `depth` along the ray through `pixel`.
pub fn back_project(pixel: Pixel, depth: f64, k: &CameraIntrinsics, pose: &Pose) -> Point3 {
    let pc = k.unproject(pixel) * depth;
    pose.rotation.transpose() * (pc - pose.translation)
}

/// Geodesic rotation angle in radians.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // acos loses precision near zero; use the skew part there.
    let s = 0.5 * Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    s.atan2(c)
}

/// Positional error (meters, between camera centers) and angular error
/// (degrees, geodesic angle of `R_est · R_truthᵀ`).
pub fn pose_error(estimate: &Pose, truth: &Pose) -> (f64, f64) {
    let positional = (estimate.center() - truth.center()).norm();
    let angular = rotation_angle(&(estimate.rotation * truth.rotation.transpose())).to_degrees();
    (positional, angular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-3.0f64..3.0), prop::array::uniform3(-5.0f64..5.0))
            .prop_map(|(w, t)| Pose::from_axis_angle(Vector3::from(w), Vector3::from(t)))
    }

    #[test]
    fn projects_optical_axis_and_offset_points() {
        let (p, z) = project(&Point3::new(0.0, 0.0, 5.0), &cam(), &Pose::identity());
        assert_eq!((p.u, p.v, z), (320.0, 240.0, 5.0));
        let (p, z) = project(&Point3::new(1.0, 0.0, 2.0), &cam(), &Pose::identity());
        assert_eq!((p.u, p.v, z), (370.0, 240.0, 2.0));
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, -0.5, 4, 4).is_err());
    }

    #[test]
    fn pose_error_examples() {
        let id = Pose::identity();
        assert_eq!(pose_error(&id, &id), (0.0, 0.0));

        // Center at (0.03, 0, 0) means t = -R c.
        let shifted = Pose::from_axis_angle(Vector3::zeros(), Vector3::new(-0.03, 0.0, 0.0));
        let (pos, ang) = pose_error(&shifted, &id);
        assert!((pos - 0.03).abs() < 1e-15 && ang == 0.0);

        let rotated = Pose::from_axis_angle(Vector3::z() * 1f64.to_radians(), Vector3::zeros());
        let (pos, ang) = pose_error(&rotated, &id);
        assert!(pos < 1e-15);
        assert!((ang - 1.0).abs() < 1e-9, "{ang}");
    }

    #[test]
    fn invert_identity_is_identity() {
        assert_eq!(invert(&Pose::identity()), Pose::identity());
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Point3::new(1.0, 2.0, 0.5);
        let target = Point3::new(-1.0, 0.0, 1.0);
        let pose = Pose::look_at(eye, target, Vector3::z()).unwrap();
        assert!(pose.is_valid());
        let (p, z) = project(&target, &cam(), &pose);
        assert!((p.u - 320.0).abs() < 1e-9 && (p.v - 240.0).abs() < 1e-9 && z > 0.0);
        // World up projects above the target.
        let (above, _) = project(&(target + Vector3::z() * 0.1), &cam(), &pose);
        assert!(above.v < p.v);
        assert!((pose.center() - eye).norm() < 1e-12);
    }

    #[test]
    fn reorthonormalizes_slightly_drifted_rotation() {
        let mut r = Rotation3::new(Vector3::new(0.3, -0.2, 0.1)).into_inner();
        r[(0, 1)] += 1e-6;
        let pose = Pose::new(r, Vector3::zeros()).unwrap();
        assert!(pose.is_valid());
        let mut bad = Matrix3::identity();
        bad[(0, 0)] = 2.0;
        assert!(matches!(
            Pose::new(bad, Vector3::zeros()),
            Err(GeometryError::NotOrthonormal(_))
        ));
    }

    fn homogeneous(p: &Pose) -> nalgebra::Matrix4<f64> {
        let mut h = nalgebra::Matrix4::identity();
        h.fixed_view_mut::<3, 4>(0, 0).copy_from(&p.matrix());
        h
    }

    proptest! {
        #[test]
        fn project_back_project_round_trip(pose in arb_pose(), q in prop::array::uniform3(-4.0f64..4.0)) {
            let q = Point3::from(q);
            let (px, depth) = project(&q, &cam(), &pose);
            prop_assume!(depth.abs() > 1e-3);
            let back = back_project(px, depth, &cam(), &pose);
            prop_assert!((back - q).norm() < 1e-9);
        }

        #[test]
        fn compose_with_inverse_is_identity(a in arb_pose()) {
            let id = compose(&a, &invert(&a));
            prop_assert!((id.rotation - Matrix3::identity()).amax() < 1e-12);
            prop_assert!(id.translation.amax() < 1e-12);
        }

        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let lhs = compose(&compose(&a, &b), &c);
            let rhs = compose(&a, &compose(&b, &c));
            // Oracle: direct 4x4 homogeneous products.
            let direct = homogeneous(&a) * homogeneous(&b) * homogeneous(&c);
            prop_assert!((lhs.matrix() - rhs.matrix()).amax() < 1e-12);
            prop_assert!((lhs.matrix() - direct.fixed_view::<3, 4>(0, 0)).amax() < 1e-12);
            prop_assert!(lhs.is_valid());
        }

        #[test]
        fn projection_is_equivariant(pose in arb_pose(), q in prop::array::uniform3(-4.0f64..4.0)) {
            let q = Point3::from(q);
            let (a, za) = project(&q, &cam(), &pose);
            let (b, zb) = project(&pose.transform(&q), &cam(), &Pose::identity());
            prop_assert_eq!(za, zb);
            prop_assert!(a.distance(b) < 1e-9 || !a.is_finite());
        }

        #[test]
        fn angular_error_is_symmetric(a in arb_pose(), b in arb_pose()) {
            let (_, ab) = pose_error(&a, &b);
            let (_, ba) = pose_error(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-9);
        }
    }
}
