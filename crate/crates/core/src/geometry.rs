//! Rigid poses, pinhole projection and plane-induced homographies.
//!
//! Camera frame: x to the right, y down, z along the optical axis. Image
//! coordinates are continuous pixel coordinates with the origin at the
//! top-left corner of the top-left pixel, so pixel `(i, j)` has its center
//! at `(i + 0.5, j + 0.5)` and the principal point sits at the image center.
//!
//! A patch is a square of side `s` lying in the local `z = 0` plane. Its
//! texture corners are listed top-left, top-right, bottom-right, bottom-left
//! and every 4-point structure in this module keeps that order.

use nalgebra::{Matrix3, SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Point2 = Vector2<f64>;

/// Minimum depth (world units) for a point to count as in front of the camera.
pub const DEPTH_EPS: f64 = 1e-6;

/// Projected quads smaller than this (px²) are treated as invisible.
pub const MIN_QUAD_AREA: f64 = 4.0;

/// A proper rotation (orthonormal, det = +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Rotation about the camera y axis.
    pub fn about_y(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    /// Rotation about the camera z (optical) axis.
    pub fn about_z(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Rotation(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// `R = R_y(yaw) * R_z(roll)`: roll spins the texture inside its own plane,
/// then yaw tilts that plane away from the camera.
pub fn rotation_from_angles(yaw_deg: f64, roll_deg: f64) -> Rotation {
    Rotation::about_y(yaw_deg) * Rotation::about_z(roll_deg)
}

/// Rigid motion `p -> R p + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn transform_point(&self, p0: &Vec3) -> Vec3 {
        self.rotation.apply(p0) + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub fov_deg: f64,
}

/// Square-pixel pinhole camera whose horizontal field of view is `fov_deg`.
pub fn intrinsics_from_fov(fov_deg: f64, width: usize, height: usize) -> Result<CameraIntrinsics> {
    if !(fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(invalid(format!("field of view {fov_deg} outside (0, 180)")));
    }
    if width == 0 || height == 0 {
        return Err(invalid("image dimensions must be positive"));
    }
    let f = (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
    Ok(CameraIntrinsics {
        fx: f,
        fy: f,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        width,
        height,
        fov_deg,
    })
}

impl CameraIntrinsics {
    /// Half-extent of the visible region at depth `z`, in world units.
    pub fn half_extent_at(&self, z: f64) -> (f64, f64) {
        (self.cx * z / self.fx, self.cy * z / self.fy)
    }
}

/// Perspective projection into pixel coordinates.
pub fn project(k: &CameraIntrinsics, p: &Vec3) -> Result<Point2> {
    if !(p.z > DEPTH_EPS) {
        return Err(Error::BehindCamera { depth: p.z });
    }
    Ok(Point2::new(k.cx + k.fx * p.x / p.z, k.cy + k.fy * p.y / p.z))
}

/// One 3D pose of the patch plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchPlacement {
    pub yaw_deg: f64,
    pub roll_deg: f64,
    /// Distance of the patch center along the optical axis.
    pub depth: f64,
    /// Lateral (x, y) position of the patch center at `depth`.
    pub offset: [f64; 2],
    /// Edge length of the square patch.
    pub side: f64,
}

impl PatchPlacement {
    pub fn centered(yaw_deg: f64, roll_deg: f64, depth: f64, side: f64) -> Self {
        PatchPlacement {
            yaw_deg,
            roll_deg,
            depth,
            offset: [0.0, 0.0],
            side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.yaw_deg, self.roll_deg, self.depth, self.side, self.offset[0], self.offset[1]]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("placement has non-finite parameters"));
        }
        if self.depth <= 0.0 {
            return Err(invalid(format!("placement depth {} must be positive", self.depth)));
        }
        if self.side <= 0.0 {
            return Err(invalid(format!("patch side {} must be positive", self.side)));
        }
        Ok(())
    }

    pub fn pose(&self) -> Pose {
        Pose {
            rotation: rotation_from_angles(self.yaw_deg, self.roll_deg),
            translation: Vec3::new(self.offset[0], self.offset[1], self.depth),
        }
    }

    /// Plane normal in camera coordinates; points at the camera when front-facing.
    pub fn normal(&self) -> Vec3 {
        self.pose().rotation.apply(&Vec3::new(0.0, 0.0, -1.0))
    }

    pub fn with_offset(mut self, offset: [f64; 2]) -> Self {
        self.offset = offset;
        self
    }
}

/// Patch-local corner coordinates (z = 0 plane), in texture-corner order.
pub fn local_corners(side: f64) -> [Vec3; 4] {
    let h = side / 2.0;
    [
        Vec3::new(-h, -h, 0.0),
        Vec3::new(h, -h, 0.0),
        Vec3::new(h, h, 0.0),
        Vec3::new(-h, h, 0.0),
    ]
}

pub fn patch_corners_world(placement: &PatchPlacement) -> [Vec3; 4] {
    let pose = placement.pose();
    local_corners(placement.side).map(|c| pose.transform_point(&c))
}

/// Projected patch outline, corners in texture order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad(pub [Point2; 4]);

impl Quad {
    pub fn corners(&self) -> &[Point2; 4] {
        &self.0
    }

    /// Shoelace area; positive for the orientation of a front-facing patch.
    pub fn signed_area(&self) -> f64 {
        let p = &self.0;
        (0..4)
            .map(|i| {
                let a = p[i];
                let b = p[(i + 1) % 4];
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    /// Every turn has the same (positive) sign: convex, not self-intersecting.
    pub fn is_convex_positive(&self) -> bool {
        let p = &self.0;
        (0..4).all(|i| {
            let a = p[i];
            let b = p[(i + 1) % 4];
            let c = p[(i + 2) % 4];
            let e1 = b - a;
            let e2 = c - b;
            e1.x * e2.y - e1.y * e2.x > 0.0
        })
    }

    pub fn contains(&self, pt: &Point2) -> bool {
        let p = &self.0;
        (0..4).all(|i| {
            let a = p[i];
            let b = p[(i + 1) % 4];
            let e = b - a;
            let r = pt - a;
            e.x * r.y - e.y * r.x >= 0.0
        })
    }

    /// `(min_x, min_y, max_x, max_y)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let xs = self.0.iter().map(|p| p.x);
        let ys = self.0.iter().map(|p| p.y);
        (
            xs.clone().fold(f64::INFINITY, f64::min),
            ys.clone().fold(f64::INFINITY, f64::min),
            xs.fold(f64::NEG_INFINITY, f64::max),
            ys.fold(f64::NEG_INFINITY, f64::max),
        )
    }

    pub fn inside_image(&self, width: usize, height: usize) -> bool {
        let (x0, y0, x1, y1) = self.bounds();
        x0 >= 0.0 && y0 >= 0.0 && x1 <= width as f64 && y1 <= height as f64
    }
}

/// Why a placement cannot be rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invisible {
    BehindCamera,
    BackFacing,
    NotConvex,
    TooSmall,
}

/// Projects the patch outline. Grazing and back-facing poses come back as
/// `Err(Invisible)` so that sweeps can keep going.
pub fn project_patch(
    placement: &PatchPlacement,
    k: &CameraIntrinsics,
) -> std::result::Result<Quad, Invisible> {
    let world = patch_corners_world(placement);
    if world.iter().any(|c| c.z <= DEPTH_EPS) {
        return Err(Invisible::BehindCamera);
    }
    let center = Vec3::new(placement.offset[0], placement.offset[1], placement.depth);
    if placement.normal().dot(&center) >= 0.0 {
        return Err(Invisible::BackFacing);
    }
    let mut pts = [Point2::zeros(); 4];
    for (dst, c) in pts.iter_mut().zip(world.iter()) {
        *dst = Point2::new(k.cx + k.fx * c.x / c.z, k.cy + k.fy * c.y / c.z);
    }
    let quad = Quad(pts);
    if !quad.is_convex_positive() {
        return Err(Invisible::NotConvex);
    }
    if quad.signed_area() < MIN_QUAD_AREA {
        return Err(Invisible::TooSmall);
    }
    Ok(quad)
}

/// Projective map between planes, defined up to scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(pub Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Scaled so that `h[2][2] = 1` when that entry is nonzero, otherwise to unit Frobenius norm.
    pub fn normalized(&self) -> Self {
        let h22 = self.0[(2, 2)];
        if h22.abs() > 1e-15 {
            Homography(self.0 / h22)
        } else {
            Homography(self.0 / self.0.norm())
        }
    }

    pub fn apply(&self, p: &Point2) -> Option<Point2> {
        let v = self.0 * Vec3::new(p.x, p.y, 1.0);
        if v.z.abs() < 1e-300 {
            return None;
        }
        Some(Point2::new(v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Result<Homography> {
        let n = self.normalized();
        let det = n.0.determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::DegenerateHomography { det });
        }
        n.0.try_inverse()
            .map(|m| Homography(m).normalized())
            .ok_or(Error::DegenerateHomography { det })
    }
}

/// Hartley conditioning: centroid at the origin, mean distance sqrt(2).
fn conditioner(pts: &[Point2; 4]) -> Matrix3<f64> {
    let centroid = pts.iter().fold(Point2::zeros(), |acc, p| acc + p) / 4.0;
    let mean_dist = pts.iter().map(|p| (p - centroid).norm()).sum::<f64>() / 4.0;
    let s = if mean_dist > 1e-12 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * centroid.x, 0.0, s, -s * centroid.y, 0.0, 0.0, 1.0)
}

fn has_collinear_triple(pts: &[Point2; 4]) -> bool {
    let scale = pts
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0, f64::max);
    for skip in 0..4 {
        let t: Vec<&Point2> = pts.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, p)| p).collect();
        let a = t[1] - t[0];
        let b = t[2] - t[0];
        if (a.x * b.y - a.y * b.x).abs() <= 1e-12 * scale * scale {
            return true;
        }
    }
    false
}

/// Four-point direct linear transform: `H` with `dst[i] ~ H src[i]`.
pub fn homography_from_correspondences(src: &[Point2; 4], dst: &Quad) -> Result<Homography> {
    let dst = dst.corners();
    if has_collinear_triple(src) || has_collinear_triple(dst) {
        return Err(Error::DegenerateCorrespondence);
    }
    let ts = conditioner(src);
    let td = conditioner(dst);
    let cond = |t: &Matrix3<f64>, p: &Point2| {
        let v = t * Vec3::new(p.x, p.y, 1.0);
        Point2::new(v.x / v.z, v.y / v.z)
    };

    // 8 equations, padded with a zero row so the SVD yields the full V.
    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..4 {
        let s = cond(&ts, &src[i]);
        let d = cond(&td, &dst[i]);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * i;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateCorrespondence)?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    // one exact zero from the padding row plus one null vector: the
    // second-smallest value must stay clear of zero
    let largest = svd.singular_values[order[8]];
    if svd.singular_values[order[1]] <= 1e-10 * largest {
        return Err(Error::DegenerateCorrespondence);
    }
    let h = v_t.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(Error::DegenerateCorrespondence)?;
    Ok(Homography(td_inv * hn * ts).normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn intrinsics_examples() {
        let k = intrinsics_from_fov(60.0, 224, 224).unwrap();
        assert!(close(k.fx, 112.0 / 30f64.to_radians().tan(), 1e-12));
        assert!(close(k.fx, 193.9897, 1e-4));
        assert_eq!(k.fx, k.fy);
        assert_eq!((k.cx, k.cy), (112.0, 112.0));

        let k = intrinsics_from_fov(90.0, 2, 2).unwrap();
        assert!(close(k.fx, 1.0, 1e-12));

        let k = intrinsics_from_fov(60.0, 64, 64).unwrap();
        assert!(close(k.fx, 32.0 * 3f64.sqrt(), 1e-9));
        assert!(close(k.fx, 55.4256, 1e-4));
    }

    #[test]
    fn intrinsics_reject_bad_fov() {
        assert!(intrinsics_from_fov(0.0, 64, 64).is_err());
        assert!(intrinsics_from_fov(180.0, 64, 64).is_err());
        assert!(intrinsics_from_fov(-5.0, 64, 64).is_err());
        assert!(intrinsics_from_fov(60.0, 0, 64).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(*rotation_from_angles(0.0, 0.0).matrix(), Matrix3::identity());
        let v = rotation_from_angles(90.0, 0.0).apply(&Vec3::new(0.0, 0.0, -1.0));
        assert!((v - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        let v = rotation_from_angles(0.0, 90.0).apply(&Vec3::new(1.0, 0.0, 0.0));
        assert!((v - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn transform_point_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::identity().transform_point(&p), p);
        let shift = Pose {
            rotation: Rotation::identity(),
            translation: Vec3::new(0.0, 0.0, 7.0),
        };
        assert_eq!(shift.transform_point(&Vec3::zeros()), Vec3::new(0.0, 0.0, 7.0));
        let yaw = Pose {
            rotation: Rotation::about_y(90.0),
            translation: Vec3::zeros(),
        };
        let q = yaw.transform_point(&Vec3::new(0.0, 0.0, -1.0));
        assert!((q - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn project_examples() {
        let unit = CameraIntrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 1, height: 1, fov_deg: 90.0 };
        assert_eq!(project(&unit, &Vec3::new(0.0, 0.0, 7.0)).unwrap(), Point2::zeros());
        let two = CameraIntrinsics { fx: 2.0, fy: 2.0, ..unit };
        assert_eq!(project(&two, &Vec3::new(1.0, 2.0, 4.0)).unwrap(), Point2::new(0.5, 1.0));
        assert!(matches!(
            project(&two, &Vec3::new(1.0, 1.0, 0.0)),
            Err(Error::BehindCamera { .. })
        ));
    }

    fn corner_set_matches(got: &[Vec3; 4], want: &[Vec3]) -> bool {
        want.iter().all(|w| got.iter().any(|g| (g - w).norm() < 1e-12))
    }

    #[test]
    fn corner_examples() {
        let square: Vec<Vec3> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|&(x, y)| Vec3::new(x, y, 7.0))
            .collect();
        let c = patch_corners_world(&PatchPlacement::centered(0.0, 0.0, 7.0, 2.0));
        assert!(corner_set_matches(&c, &square));
        assert!((c[0] - square[0]).norm() < 1e-12);

        let rolled = patch_corners_world(&PatchPlacement::centered(0.0, 90.0, 7.0, 2.0));
        assert!(corner_set_matches(&rolled, &square));
        // top-left texel corner moved to where top-right used to be
        assert!((rolled[0] - square[1]).norm() < 1e-12);

        let edge_on = patch_corners_world(&PatchPlacement::centered(90.0, 0.0, 7.0, 2.0));
        for p in &edge_on {
            assert!(p.x.abs() < 1e-12);
            assert!(close(p.z, 6.0, 1e-12) || close(p.z, 8.0, 1e-12));
        }
    }

    #[test]
    fn fronto_parallel_quad_is_centered_square() {
        let k = intrinsics_from_fov(60.0, 64, 64).unwrap();
        let quad = project_patch(&PatchPlacement::centered(0.0, 0.0, 7.0, 2.0), &k).unwrap();
        let half = k.fx * 2.0 / 7.0 / 2.0;
        let want = [(-half, -half), (half, -half), (half, half), (-half, half)];
        for (p, (dx, dy)) in quad.corners().iter().zip(want) {
            assert!(close(p.x, 32.0 + dx, 1e-9));
            assert!(close(p.y, 32.0 + dy, 1e-9));
        }
    }

    #[test]
    fn degenerate_and_back_facing_are_invalid() {
        let k = intrinsics_from_fov(60.0, 64, 64).unwrap();
        assert!(project_patch(&PatchPlacement::centered(90.0, 0.0, 7.0, 2.0), &k).is_err());
        assert_eq!(
            project_patch(&PatchPlacement::centered(120.0, 0.0, 7.0, 2.0), &k),
            Err(Invisible::BackFacing)
        );
        assert_eq!(
            project_patch(&PatchPlacement::centered(80.0, 0.0, 0.5, 2.0), &k),
            Err(Invisible::BehindCamera)
        );
        assert_eq!(
            project_patch(&PatchPlacement::centered(0.0, 0.0, 200.0, 0.1), &k),
            Err(Invisible::TooSmall)
        );
    }

    #[test]
    fn yaw_mirror_symmetry() {
        let k = intrinsics_from_fov(60.0, 64, 64).unwrap();
        for yaw in [10.0, 35.0, 60.0, 85.0] {
            let a = project_patch(&PatchPlacement::centered(yaw, 0.0, 7.0, 2.0), &k).unwrap();
            let b = project_patch(&PatchPlacement::centered(-yaw, 0.0, 7.0, 2.0), &k).unwrap();
            // mirroring swaps left and right texture corners
            let pairs = [(0, 1), (1, 0), (2, 3), (3, 2)];
            for (i, j) in pairs {
                let p = a.corners()[i];
                let q = b.corners()[j];
                assert!(close(p.x, 2.0 * k.cx - q.x, 1e-9), "yaw {yaw}");
                assert!(close(p.y, q.y, 1e-9));
            }
        }
    }

    #[test]
    fn dlt_examples() {
        let unit = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let h = homography_from_correspondences(&unit, &Quad(unit)).unwrap();
        assert!((h.matrix() - Matrix3::identity()).abs().max() < 1e-12);

        let doubled = Quad(unit.map(|p| p * 2.0));
        let h = homography_from_correspondences(&unit, &doubled).unwrap();
        let want = Matrix3::from_diagonal(&Vec3::new(2.0, 2.0, 1.0));
        assert!((h.matrix() - want).abs().max() < 1e-12);
    }

    #[test]
    fn dlt_rejects_collinear() {
        let line = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 1.0),
        ];
        let sq = Quad([
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!(matches!(
            homography_from_correspondences(&line, &sq),
            Err(Error::DegenerateCorrespondence)
        ));
    }

    #[test]
    fn singular_homography_has_no_inverse() {
        let h = Homography(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0));
        assert!(h.inverse().is_err());
    }

    fn convex_quad() -> impl Strategy<Value = [Point2; 4]> {
        // jittered square corners stay convex for jitter < 0.25 * side
        (
            -50.0f64..50.0,
            -50.0f64..50.0,
            5.0f64..80.0,
            proptest::array::uniform8(-0.2f64..0.2),
        )
            .prop_map(|(x, y, s, j)| {
                let base = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
                let mut out = [Point2::zeros(); 4];
                for i in 0..4 {
                    out[i] = Point2::new(x + s * (base[i].0 + j[2 * i]), y + s * (base[i].1 + j[2 * i + 1]));
                }
                out
            })
    }

    proptest! {
        #[test]
        fn rotation_is_proper(yaw in -360.0f64..360.0, roll in -360.0f64..360.0) {
            let r = rotation_from_angles(yaw, roll);
            let m = r.matrix();
            prop_assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn dlt_maps_corners(src in convex_quad(), dst in convex_quad()) {
            let h = homography_from_correspondences(&src, &Quad(dst)).unwrap();
            for i in 0..4 {
                let p = h.apply(&src[i]).unwrap();
                prop_assert!((p - dst[i]).norm() < 1e-8);
            }
            let back = h.inverse().unwrap();
            for i in 0..4 {
                let p = back.apply(&h.apply(&src[i]).unwrap()).unwrap();
                prop_assert!((p - src[i]).norm() < 1e-8);
            }
        }
    }
}
