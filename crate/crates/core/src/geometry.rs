//! Pinhole camera poses, projection, Plücker ray maps and the two geometric
//! terms of relevance scoring: frustum overlap and normalized translation
//! distance.
//!
//! Conventions: the camera frame is x right, y down, z forward. A
//! [`CameraPose`] stores the world-from-camera rotation and the camera center
//! in world coordinates. Intrinsics are normalized by image size, so a pixel
//! coordinate of `(0, 0)` is the top-left image corner and `(1, 1)` the
//! bottom-right one.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `R·Rᵀ − I` and `det R − 1` for a valid rotation.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation is not orthonormal (max |R·Rᵀ − I| = {0:.3e})")]
    NotOrthonormal(f64),
    #[error("rotation determinant is {0}, expected +1")]
    NotProper(f64),
    #[error("focal lengths must be positive (fx = {fx}, fy = {fy})")]
    NonPositiveFocal { fx: f64, fy: f64 },
    #[error("principal point must lie inside (0, 1) (cx = {cx}, cy = {cy})")]
    PrincipalPointOutside { cx: f64, cy: f64 },
    #[error("image size must be at least 1x1, got {0}x{1}")]
    EmptyImage(u32, u32),
    #[error("pose contains a non-finite value")]
    NonFinite,
    #[error("invalid overlap config: {0}")]
    InvalidOverlapConfig(&'static str),
}

/// Pinhole intrinsics normalized to image width (fx, cx) and height (fy, cy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Centered intrinsics with the given horizontal field of view and square
    /// pixels.
    pub fn from_hfov(hfov_deg: f64, width: u32, height: u32) -> Self {
        let fx = 0.5 / (hfov_deg.to_radians() / 2.0).tan();
        let fy = fx * width as f64 / height as f64;
        Intrinsics {
            fx,
            fy,
            cx: 0.5,
            cy: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx.is_finite() && self.fy.is_finite() && self.cx.is_finite() && self.cy.is_finite())
        {
            return Err(GeometryError::NonFinite);
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::NonPositiveFocal {
                fx: self.fx,
                fy: self.fy,
            });
        }
        if !(self.cx > 0.0 && self.cx < 1.0 && self.cy > 0.0 && self.cy < 1.0) {
            return Err(GeometryError::PrincipalPointOutside {
                cx: self.cx,
                cy: self.cy,
            });
        }
        Ok(())
    }

    /// Horizontal field of view in degrees (for centered intrinsics).
    pub fn hfov_deg(&self) -> f64 {
        2.0 * (0.5 / self.fx).atan().to_degrees()
    }
}

impl Default for Intrinsics {
    /// 60° horizontal field of view, square image.
    fn default() -> Self {
        Intrinsics::from_hfov(60.0, 1, 1)
    }
}

/// Rigid camera pose with pinhole intrinsics.
///
/// Construction validates the rotation and intrinsics, so every `CameraPose`
/// in circulation is usable without further checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    center: Vector3<f64>,
    intrinsics: Intrinsics,
    width: u32,
    height: u32,
}

/// Serialized form of a pose: rotation rows, center, intrinsics, image size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub rotation: [[f64; 3]; 3],
    pub center: [f64; 3],
    pub intrinsics: Intrinsics,
    pub width: u32,
    pub height: u32,
}

impl TryFrom<PoseRecord> for CameraPose {
    type Error = GeometryError;

    fn try_from(rec: PoseRecord) -> Result<Self, Self::Error> {
        let r = rec.rotation;
        let rotation = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        CameraPose::new(
            rotation,
            Vector3::from(rec.center),
            rec.intrinsics,
            rec.width,
            rec.height,
        )
    }
}

impl From<CameraPose> for PoseRecord {
    fn from(pose: CameraPose) -> Self {
        let m = pose.rotation;
        PoseRecord {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            center: [pose.center.x, pose.center.y, pose.center.z],
            intrinsics: pose.intrinsics,
            width: pose.width,
            height: pose.height,
        }
    }
}

/// Largest deviation of `R·Rᵀ` from identity and the determinant of `R`.
pub fn orthonormality_error(rotation: &Matrix3<f64>) -> (f64, f64) {
    let residual = rotation * rotation.transpose() - Matrix3::identity();
    (residual.amax(), rotation.determinant())
}

/// Rotation `Ry(yaw)·Rx(pitch)·Rz(roll)`, angles in radians. Positive yaw
/// turns the optical axis towards +x.
pub fn rotation_from_euler(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let rz = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
    ry * rx * rz
}

impl CameraPose {
    pub fn new(
        rotation: Matrix3<f64>,
        center: Vector3<f64>,
        intrinsics: Intrinsics,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if rotation.iter().chain(center.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let (residual, det) = orthonormality_error(&rotation);
        if residual > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::NotOrthonormal(residual));
        }
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(GeometryError::NotProper(det));
        }
        intrinsics.validate()?;
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage(width, height));
        }
        Ok(CameraPose {
            rotation,
            center,
            intrinsics,
            width,
            height,
        })
    }

    /// Pose from yaw/pitch/roll in degrees (see [`rotation_from_euler`]).
    pub fn from_euler_deg(
        yaw: f64,
        pitch: f64,
        roll: f64,
        center: Vector3<f64>,
        intrinsics: Intrinsics,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let rotation = rotation_from_euler(yaw.to_radians(), pitch.to_radians(), roll.to_radians());
        CameraPose::new(rotation, center, intrinsics, width, height)
    }

    /// Identity rotation at the origin.
    pub fn identity(intrinsics: Intrinsics, width: u32, height: u32) -> Result<Self, GeometryError> {
        CameraPose::new(Matrix3::identity(), Vector3::zeros(), intrinsics, width, height)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn center(&self) -> &Vector3<f64> {
        &self.center
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Camera +x axis in world coordinates.
    pub fn right_axis(&self) -> Vector3<f64> {
        self.rotation.column(0).into_owned()
    }

    /// Optical axis in world coordinates.
    pub fn forward_axis(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    /// Same orientation and intrinsics, different center.
    pub fn with_center(&self, center: Vector3<f64>) -> Self {
        CameraPose {
            center,
            ..self.clone()
        }
    }

    /// Applies the rigid transform `x ↦ Q·x + t` to the camera.
    pub fn transformed(&self, q: &Matrix3<f64>, t: &Vector3<f64>) -> Result<Self, GeometryError> {
        CameraPose::new(
            q * self.rotation,
            q * self.center + t,
            self.intrinsics,
            self.width,
            self.height,
        )
    }

    /// Camera-frame direction (z = 1) through normalized pixel `(u, v)`.
    pub fn pixel_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
    }

    /// Unit world-frame direction of the ray through normalized pixel `(u, v)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        (self.rotation * self.pixel_direction(u, v)).normalize()
    }

    /// Geodesic angle between two rotations, radians.
    pub fn rotation_angle_to(&self, other: &CameraPose) -> f64 {
        let m = self.rotation.transpose() * other.rotation;
        let axis = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        (axis.norm() / 2.0).atan2((m.trace() - 1.0) / 2.0)
    }
}

/// Projects a world point through the pinhole model.
///
/// Returns the normalized pixel and the camera-frame depth. Points behind the
/// camera or outside the image are returned as computed; callers filter.
pub fn project_point(pose: &CameraPose, world_point: &Vector3<f64>) -> (Vector2<f64>, f64) {
    let p = pose.rotation.tr_mul(&(world_point - pose.center));
    let k = &pose.intrinsics;
    let pixel = Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy);
    (pixel, p.z)
}

/// Sampling and weighting parameters for relevance scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapConfig {
    /// Frustum samples per image axis.
    pub grid: usize,
    /// Depth of the sample plane, scene units.
    pub sample_depth: f64,
    /// Distance normalizer (scene diameter), scene units.
    pub scene_diameter: f64,
    /// Weight of the normalized distance penalty.
    pub distance_weight: f64,
}

impl Default for OverlapConfig {
    fn default() -> Self {
        OverlapConfig {
            grid: 16,
            sample_depth: 1.0,
            scene_diameter: 1.0,
            distance_weight: 0.5,
        }
    }
}

impl OverlapConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.grid < 2 {
            return Err(GeometryError::InvalidOverlapConfig("grid must be at least 2"));
        }
        if !(self.sample_depth > 0.0 && self.sample_depth.is_finite()) {
            return Err(GeometryError::InvalidOverlapConfig("sample_depth must be positive"));
        }
        if !(self.scene_diameter > 0.0 && self.scene_diameter.is_finite()) {
            return Err(GeometryError::InvalidOverlapConfig("scene_diameter must be positive"));
        }
        if !(self.distance_weight >= 0.0 && self.distance_weight.is_finite()) {
            return Err(GeometryError::InvalidOverlapConfig(
                "distance_weight must be non-negative",
            ));
        }
        Ok(())
    }
}

/// World-space frustum samples of one camera on the configured depth plane.
///
/// Scoring one target against many history poses reuses these points.
#[derive(Debug, Clone)]
pub struct FrustumSamples {
    points: Vec<Vector3<f64>>,
}

impl FrustumSamples {
    pub fn new(pose: &CameraPose, cfg: &OverlapConfig) -> Self {
        let g = cfg.grid;
        let mut points = Vec::with_capacity(g * g);
        for j in 0..g {
            let v = (j as f64 + 0.5) / g as f64;
            for i in 0..g {
                let u = (i as f64 + 0.5) / g as f64;
                let local = pose.pixel_direction(u, v) * cfg.sample_depth;
                points.push(pose.rotation * local + pose.center);
            }
        }
        FrustumSamples { points }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    /// Fraction of samples landing in front of `history` and inside its image.
    pub fn overlap_with(&self, history: &CameraPose) -> f64 {
        let visible = self
            .points
            .iter()
            .filter(|p| {
                let (pixel, depth) = project_point(history, p);
                depth > 0.0
                    && (0.0..=1.0).contains(&pixel.x)
                    && (0.0..=1.0).contains(&pixel.y)
            })
            .count();
        visible as f64 / self.points.len() as f64
    }
}

/// Fraction of the target's G×G frustum samples at depth `sample_depth` that
/// are visible to the history camera. Occlusion is ignored.
pub fn fov_overlap(target: &CameraPose, history: &CameraPose, cfg: &OverlapConfig) -> f64 {
    FrustumSamples::new(target, cfg).overlap_with(history)
}

/// `min(‖t_target − t_history‖ / D, 1)`.
pub fn translation_distance(target: &CameraPose, history: &CameraPose, cfg: &OverlapConfig) -> f64 {
    ((target.center - history.center).norm() / cfg.scene_diameter).min(1.0)
}

/// Per-pixel Plücker coordinates `(d, o × d)` of a camera's pixel rays.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerMap {
    height: usize,
    width: usize,
    rays: Vec<[f64; 6]>,
}

impl PluckerMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(direction, moment)` for pixel `(row, col)`.
    pub fn ray(&self, row: usize, col: usize) -> (Vector3<f64>, Vector3<f64>) {
        let r = &self.rays[row * self.width + col];
        (Vector3::new(r[0], r[1], r[2]), Vector3::new(r[3], r[4], r[5]))
    }

    /// Row-major 6-vectors.
    pub fn as_slice(&self) -> &[[f64; 6]] {
        &self.rays
    }
}

/// Plücker embedding of every pixel-center ray of `pose` at `height × width`.
pub fn plucker_embed(pose: &CameraPose, height: usize, width: usize) -> PluckerMap {
    let origin = pose.center;
    let mut rays = Vec::with_capacity(height * width);
    for row in 0..height {
        let v = (row as f64 + 0.5) / height as f64;
        for col in 0..width {
            let u = (col as f64 + 0.5) / width as f64;
            let d = pose.pixel_ray(u, v);
            let m = origin.cross(&d);
            rays.push([d.x, d.y, d.z, m.x, m.y, m.z]);
        }
    }
    PluckerMap {
        height,
        width,
        rays,
    }
}
