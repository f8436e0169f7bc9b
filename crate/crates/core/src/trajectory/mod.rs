//! Camera trajectories: stress-test patterns, RealEstate10K camera files,
//! the native JSON format, and training-pair synthesis.

mod patterns;
mod re10k;
mod synth;

pub use patterns::{gen_pattern, CameraRig, PatternKind, PatternSpec};
pub use re10k::{export_re10k, import_re10k, Re10kInfo};
pub use synth::{apply_history_dropout, synth_pseudo_loop, LoopKind, PseudoLoop, TrainingPair};

use std::ops::Range;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraPose, GeometryError, Intrinsics};

/// Default segment length in frames.
pub const DEFAULT_SEGMENT_LENGTH: usize = 49;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid pattern parameters: {0}")]
    InvalidParams(String),
    #[error("trajectory is empty")]
    Empty,
    #[error("segment length must be at least 1")]
    ZeroSegmentLength,
    #[error("frame {0} does not share the intrinsics of frame 0")]
    MixedIntrinsics(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("stride must be at least 1 (a zero stride pairs every frame with itself)")]
    ZeroStride,
    #[error("stride {stride} must be smaller than the video length {frames}")]
    StrideTooLarge { stride: usize, frames: usize },
    #[error("dropout rate {0} is outside [0, 1]")]
    InvalidRate(f64),
    #[error("malformed trajectory file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A closed loop inserted into a path: the camera leaves `entry`, retraces
/// `length` poses backwards, and comes back to the same pose at `exit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSpan {
    pub entry: usize,
    pub exit: usize,
    pub length: usize,
}

/// How a trajectory was produced and which frames it expects to repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub pattern: PatternSpec,
    pub seed: u64,
    /// `(return frame, first-pass frame)` pairs whose poses coincide.
    #[serde(default)]
    pub revisits: Vec<(usize, usize)>,
    /// `(return frame, counterpart)` pairs that approximately coincide
    /// (laterally offset returns).
    #[serde(default)]
    pub counterparts: Vec<(usize, usize)>,
    #[serde(default)]
    pub loops: Vec<LoopSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re10k: Option<Re10kInfo>,
}

impl TrajectoryMeta {
    pub fn new(pattern: PatternSpec, seed: u64) -> Self {
        TrajectoryMeta {
            pattern,
            seed,
            revisits: Vec::new(),
            counterparts: Vec::new(),
            loops: Vec::new(),
            re10k: None,
        }
    }
}

/// Ordered camera poses sharing one set of intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<CameraPose>,
    segment_length: usize,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(
        poses: Vec<CameraPose>,
        segment_length: usize,
        meta: TrajectoryMeta,
    ) -> Result<Self, TrajectoryError> {
        let first = poses.first().ok_or(TrajectoryError::Empty)?;
        if segment_length == 0 {
            return Err(TrajectoryError::ZeroSegmentLength);
        }
        let k = *first.intrinsics();
        if let Some(i) = poses.iter().position(|p| *p.intrinsics() != k) {
            return Err(TrajectoryError::MixedIntrinsics(i));
        }
        Ok(Trajectory {
            poses,
            segment_length,
            meta,
        })
    }

    pub fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn segment_length(&self) -> usize {
        self.segment_length
    }

    pub fn with_segment_length(mut self, segment_length: usize) -> Result<Self, TrajectoryError> {
        if segment_length == 0 {
            return Err(TrajectoryError::ZeroSegmentLength);
        }
        self.segment_length = segment_length;
        Ok(self)
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        self.poses[0].intrinsics()
    }

    /// Generation segments: the initial frame alone, then consecutive chunks
    /// of `segment_length` frames (the last one possibly shorter).
    pub fn segments(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        out.push(0..1);
        let mut start = 1;
        while start < self.poses.len() {
            let end = (start + self.segment_length).min(self.poses.len());
            out.push(start..end);
            start = end;
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = TrajectoryFile {
            version: FORMAT_VERSION,
            segment_length: self.segment_length,
            meta: self.meta.clone(),
            frames: self.poses.iter().map(FrameRecord::from_pose).collect(),
        };
        serde_json::to_string_pretty(&file).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TrajectoryError> {
        let file: TrajectoryFile =
            serde_json::from_str(text).map_err(|e| TrajectoryError::Format(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(TrajectoryError::Format(format!(
                "unsupported version {}",
                file.version
            )));
        }
        let poses = file
            .frames
            .iter()
            .map(FrameRecord::to_pose)
            .collect::<Result<Vec<_>, _>>()?;
        Trajectory::new(poses, file.segment_length, file.meta)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    version: u32,
    segment_length: usize,
    meta: TrajectoryMeta,
    frames: Vec<FrameRecord>,
}

/// Per-frame record of the native format: unit quaternion `(w, x, y, z)` of
/// the world-from-camera rotation, camera center, intrinsics, image size.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    quaternion: [f64; 4],
    center: [f64; 3],
    intrinsics: Intrinsics,
    width: u32,
    height: u32,
}

impl FrameRecord {
    fn from_pose(pose: &CameraPose) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            *pose.rotation(),
        ));
        let c = pose.center();
        FrameRecord {
            quaternion: [q.w, q.i, q.j, q.k],
            center: [c.x, c.y, c.z],
            intrinsics: *pose.intrinsics(),
            width: pose.width(),
            height: pose.height(),
        }
    }

    fn to_pose(&self) -> Result<CameraPose, TrajectoryError> {
        let [w, x, y, z] = self.quaternion;
        let q = Quaternion::new(w, x, y, z);
        if (q.norm() - 1.0).abs() > 1e-6 {
            return Err(TrajectoryError::Format(format!(
                "quaternion {:?} is not unit length",
                self.quaternion
            )));
        }
        let rotation = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        Ok(CameraPose::new(
            rotation,
            Vector3::from(self.center),
            self.intrinsics,
            self.width,
            self.height,
        )?)
    }
}

/// Rotation geodesic angle and center distance between two poses.
pub fn pose_distance(a: &CameraPose, b: &CameraPose) -> (f64, f64) {
    (a.rotation_angle_to(b), (a.center() - b.center()).norm())
}

/// Both components of [`pose_distance`] within `tolerance`.
pub fn poses_match(a: &CameraPose, b: &CameraPose, tolerance: f64) -> bool {
    let (angle, dist) = pose_distance(a, b);
    angle <= tolerance && dist <= tolerance
}
