//! Stress-test trajectory generators.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LoopSpan, Trajectory, TrajectoryError, TrajectoryMeta, DEFAULT_SEGMENT_LENGTH};
use crate::geometry::{CameraPose, Intrinsics};

/// Intrinsics and image size shared by every pose of a generated trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub intrinsics: Intrinsics,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraRig {
    /// 60° horizontal field of view at 128×128.
    fn default() -> Self {
        CameraRig {
            intrinsics: Intrinsics::from_hfov(60.0, 128, 128),
            width: 128,
            height: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    Panoramic,
    Revisit,
    Loops,
    Offset,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [
        PatternKind::Panoramic,
        PatternKind::Revisit,
        PatternKind::Loops,
        PatternKind::Offset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Panoramic => "panoramic",
            PatternKind::Revisit => "revisit",
            PatternKind::Loops => "loops",
            PatternKind::Offset => "offset",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown pattern `{s}` (expected panoramic, revisit, loops or offset)"))
    }
}

/// Generator parameters, serialized into trajectory metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    /// Full turn in place; the last frame closes the circle.
    Panoramic { frames: usize },
    /// Yaw swings 0 → amplitude → 0, `cycles` times, in place.
    Revisit {
        frames: usize,
        cycles: usize,
        amplitude_deg: f64,
    },
    /// Forward path with seeded retrace loops.
    Loops {
        frames: usize,
        min_loops: usize,
        max_loops: usize,
        min_length: usize,
        max_length: usize,
        step: f64,
    },
    /// Forward path, then back along a path shifted along camera-right.
    Offset { frames: usize, offset: f64, step: f64 },
    /// Poses from an external source.
    Imported,
}

impl PatternSpec {
    pub fn panoramic(frames: usize) -> Self {
        PatternSpec::Panoramic { frames }
    }

    pub fn revisit(frames: usize, cycles: usize, amplitude_deg: f64) -> Self {
        PatternSpec::Revisit {
            frames,
            cycles,
            amplitude_deg,
        }
    }

    /// Default parameters of `kind` for `frames` frames.
    pub fn defaults(kind: PatternKind, frames: usize) -> Self {
        match kind {
            PatternKind::Panoramic => PatternSpec::panoramic(frames),
            PatternKind::Revisit => PatternSpec::revisit(frames, 3, 30.0),
            PatternKind::Loops => PatternSpec::Loops {
                frames,
                min_loops: 1,
                max_loops: if frames < 20 { 1 } else { 3 },
                min_length: 2,
                max_length: (frames / 10).clamp(2, 8),
                step: 0.05,
            },
            PatternKind::Offset => PatternSpec::Offset {
                frames,
                offset: 0.05,
                step: 0.05,
            },
        }
    }

    pub fn frames(&self) -> Option<usize> {
        match *self {
            PatternSpec::Panoramic { frames }
            | PatternSpec::Revisit { frames, .. }
            | PatternSpec::Loops { frames, .. }
            | PatternSpec::Offset { frames, .. } => Some(frames),
            PatternSpec::Imported => None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> TrajectoryError {
    TrajectoryError::InvalidParams(msg.into())
}

/// Generates a trajectory. Deterministic in `(spec, seed, rig)`; only the
/// loop pattern consumes randomness.
pub fn gen_pattern(
    spec: &PatternSpec,
    seed: u64,
    rig: &CameraRig,
) -> Result<Trajectory, TrajectoryError> {
    let frames = spec
        .frames()
        .ok_or_else(|| invalid("imported trajectories cannot be generated"))?;
    if frames < 2 {
        return Err(invalid(format!("need at least 2 frames, got {frames}")));
    }
    let mut meta = TrajectoryMeta::new(spec.clone(), seed);
    let poses = match *spec {
        PatternSpec::Panoramic { frames } => {
            meta.revisits = vec![(frames - 1, 0)];
            panoramic(frames, rig)?
        }
        PatternSpec::Revisit {
            frames,
            cycles,
            amplitude_deg,
        } => revisit(frames, cycles, amplitude_deg, rig, &mut meta)?,
        PatternSpec::Loops {
            frames,
            min_loops,
            max_loops,
            min_length,
            max_length,
            step,
        } => loops(
            frames,
            (min_loops, max_loops),
            (min_length, max_length),
            step,
            seed,
            rig,
            &mut meta,
        )?,
        PatternSpec::Offset {
            frames,
            offset,
            step,
        } => offset_return(frames, offset, step, rig, &mut meta)?,
        PatternSpec::Imported => unreachable!("rejected above"),
    };
    Trajectory::new(poses, DEFAULT_SEGMENT_LENGTH, meta)
}

fn yawed(rig: &CameraRig, yaw_deg: f64, center: Vector3<f64>) -> Result<CameraPose, TrajectoryError> {
    Ok(CameraPose::from_euler_deg(
        yaw_deg,
        0.0,
        0.0,
        center,
        rig.intrinsics,
        rig.width,
        rig.height,
    )?)
}

fn panoramic(frames: usize, rig: &CameraRig) -> Result<Vec<CameraPose>, TrajectoryError> {
    (0..frames)
        .map(|k| yawed(rig, k as f64 * 360.0 / (frames - 1) as f64, Vector3::zeros()))
        .collect()
}

/// Each cycle is a triangle wave in yaw: a quick turn out and a slower
/// return. The turnaround falls between two samples at a cycle-dependent
/// fraction of the period, so no pose except the cycle endpoints repeats an
/// earlier one, and the last frames before each endpoint resemble the
/// returns of earlier cycles more than the departure of the first.
fn revisit(
    frames: usize,
    cycles: usize,
    amplitude_deg: f64,
    rig: &CameraRig,
    meta: &mut TrajectoryMeta,
) -> Result<Vec<CameraPose>, TrajectoryError> {
    if cycles == 0 {
        return Err(invalid("cycles must be at least 1"));
    }
    if !(frames - 1).is_multiple_of(cycles) {
        return Err(invalid(format!(
            "frames - 1 ({}) must be a multiple of cycles ({cycles})",
            frames - 1
        )));
    }
    let period = (frames - 1) / cycles;
    if period < 2 {
        return Err(invalid("each cycle needs at least 2 steps"));
    }
    if !(amplitude_deg > 0.0 && amplitude_deg < 180.0) {
        return Err(invalid("amplitude must lie in (0, 180) degrees"));
    }
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut yaws = vec![0.0];
    for c in 0..cycles {
        let frac = ((c + 1) as f64 * GOLDEN).fract();
        let mut peak = (0.25 + 0.1 * frac) * period as f64;
        if (peak - peak.round()).abs() < 1e-3 {
            peak += 0.25;
        }
        for k in 1..=period {
            let k = k as f64;
            let yaw = if k <= peak {
                amplitude_deg * k / peak
            } else {
                amplitude_deg * (period as f64 - k) / (period as f64 - peak)
            };
            yaws.push(yaw);
        }
        meta.revisits.push(((c + 1) * period, 0));
    }
    yaws.into_iter().map(|y| yawed(rig, y, Vector3::zeros())).collect()
}

/// Gently curving forward path through the room, parameterized by arc length.
fn base_path(rig: &CameraRig, count: usize, step: f64) -> Result<Vec<CameraPose>, TrajectoryError> {
    const START_Z: f64 = -1.8;
    const CURVATURE: f64 = 0.15;
    const MAX_LENGTH: f64 = 3.6;
    let step = if count > 1 {
        step.min(MAX_LENGTH / (count - 1) as f64)
    } else {
        step
    };
    (0..count)
        .map(|b| {
            let s = b as f64 * step;
            let heading = CURVATURE * s;
            let center = Vector3::new(
                (1.0 - heading.cos()) / CURVATURE,
                0.0,
                START_Z + heading.sin() / CURVATURE,
            );
            yawed(rig, heading.to_degrees(), center)
        })
        .collect()
}

fn loops(
    frames: usize,
    (min_loops, max_loops): (usize, usize),
    (min_length, max_length): (usize, usize),
    step: f64,
    seed: u64,
    rig: &CameraRig,
    meta: &mut TrajectoryMeta,
) -> Result<Vec<CameraPose>, TrajectoryError> {
    if min_length == 0 {
        return Err(invalid("loop lengths must be positive"));
    }
    if min_loops > max_loops || min_length > max_length {
        return Err(invalid("loop ranges must satisfy min <= max"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(min_loops..=max_loops);
    let lengths: Vec<usize> = (0..count)
        .map(|_| rng.random_range(min_length..=max_length))
        .collect();
    let looped: usize = lengths.iter().map(|l| 2 * l).sum();
    if looped + 2 > frames {
        return Err(invalid(format!(
            "{count} loops of total length {looped} do not fit in {frames} frames"
        )));
    }
    let base_len = frames - looped;

    // Each loop leaves from a distinct base index at least `length` steps in.
    let mut entries: HashMap<usize, usize> = HashMap::new();
    for &len in &lengths {
        let free: Vec<usize> = (len..base_len).filter(|b| !entries.contains_key(b)).collect();
        if free.is_empty() {
            return Err(invalid(format!(
                "no room for a loop of length {len} on a {base_len}-pose path"
            )));
        }
        entries.insert(free[rng.random_range(0..free.len())], len);
    }

    let base = base_path(rig, base_len, step)?;
    let mut order = Vec::with_capacity(frames);
    for b in 0..base_len {
        order.push(b);
        if let Some(&len) = entries.get(&b) {
            let entry = order.len() - 1;
            order.extend((b - len..b).rev());
            order.extend(b - len + 1..=b);
            meta.loops.push(LoopSpan {
                entry,
                exit: order.len() - 1,
                length: len,
            });
        }
    }
    debug_assert_eq!(order.len(), frames);

    let mut first_seen: HashMap<usize, usize> = HashMap::new();
    for (frame, &b) in order.iter().enumerate() {
        match first_seen.get(&b) {
            Some(&first) => meta.revisits.push((frame, first)),
            None => {
                first_seen.insert(b, frame);
            }
        }
    }
    Ok(order.into_iter().map(|b| base[b].clone()).collect())
}

fn offset_return(
    frames: usize,
    offset: f64,
    step: f64,
    rig: &CameraRig,
    meta: &mut TrajectoryMeta,
) -> Result<Vec<CameraPose>, TrajectoryError> {
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(invalid("offset must be non-negative"));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step must be positive"));
    }
    let out_len = frames - frames / 2;
    let back_len = frames - out_len;
    let base = base_path(rig, out_len, step)?;
    let mut poses = base.clone();
    for j in 0..back_len {
        let mirror = back_len - 1 - j;
        let p = &base[mirror];
        poses.push(p.with_center(p.center() + p.right_axis() * offset));
        meta.counterparts.push((out_len + j, mirror));
    }
    Ok(poses)
}
