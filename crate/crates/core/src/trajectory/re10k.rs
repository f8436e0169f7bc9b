//! RealEstate10K camera files.
//!
//! An optional first line holds the source URL. Every other non-blank line is
//! `timestamp fx fy cx cy k1 k2` followed by the row-major 3×4 world-to-camera
//! matrix, with intrinsics normalized by image size.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{PatternSpec, Trajectory, TrajectoryError, TrajectoryMeta, DEFAULT_SEGMENT_LENGTH};
use crate::geometry::{orthonormality_error, CameraPose, Intrinsics, ORTHONORMAL_TOLERANCE};

const FIELDS: usize = 19;
const REJECT_TOLERANCE: f64 = 1e-3;

/// Fields of the source file that have no place in a [`CameraPose`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Re10kInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub timestamps: Vec<u64>,
    pub distortion: Vec<[f64; 2]>,
}

fn parse_err(line: usize, message: impl Into<String>) -> TrajectoryError {
    TrajectoryError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a camera file into a trajectory rendered at `width`×`height`.
///
/// Rotations off by more than 1e-6 but less than 1e-3 are re-orthonormalized;
/// worse ones are rejected.
pub fn import_re10k(text: &str, width: u32, height: u32) -> Result<Trajectory, TrajectoryError> {
    let mut url = None;
    let mut timestamps = Vec::new();
    let mut distortion = Vec::new();
    let mut poses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if poses.is_empty() && url.is_none() && fields.len() == 1 && fields[0].parse::<f64>().is_err() {
            url = Some(fields[0].to_string());
            continue;
        }
        if fields.len() != FIELDS {
            return Err(parse_err(
                line_no,
                format!("expected {FIELDS} fields, found {}", fields.len()),
            ));
        }
        let timestamp: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad timestamp `{}`", fields[0])))?;
        let mut v = [0.0f64; FIELDS - 1];
        for (slot, tok) in v.iter_mut().zip(&fields[1..]) {
            *slot = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad number `{tok}`")))?;
            if !slot.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value `{tok}`")));
            }
        }
        let intrinsics = Intrinsics {
            fx: v[0],
            fy: v[1],
            cx: v[2],
            cy: v[3],
        };
        let m = &v[6..];
        let mut r_cw = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let t = Vector3::new(m[3], m[7], m[11]);

        let (residual, det) = orthonormality_error(&r_cw);
        let worst = residual.max((det - 1.0).abs());
        if worst > REJECT_TOLERANCE {
            return Err(parse_err(
                line_no,
                format!("rotation is not orthonormal (error {worst:.3e})"),
            ));
        }
        if worst > ORTHONORMAL_TOLERANCE {
            r_cw = orthonormalize(&r_cw);
        }
        let r_wc = r_cw.transpose();
        let pose = CameraPose::new(r_wc, -(r_wc * t), intrinsics, width, height)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        timestamps.push(timestamp);
        distortion.push([v[4], v[5]]);
        poses.push(pose);
    }
    if poses.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let mut meta = TrajectoryMeta::new(PatternSpec::Imported, 0);
    meta.re10k = Some(Re10kInfo {
        url,
        timestamps,
        distortion,
    });
    Trajectory::new(poses, DEFAULT_SEGMENT_LENGTH, meta)
}

/// Nearest rotation via the SVD polar factor.
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    u * v_t
}

/// Writes a camera file. Timestamps, distortion and URL come from the import
/// metadata when present; otherwise timestamps are frame indices and
/// distortion is zero.
pub fn export_re10k(traj: &Trajectory) -> String {
    let info = traj.meta().re10k.as_ref().filter(|i| i.timestamps.len() == traj.len());
    let mut out = String::new();
    if let Some(url) = info.and_then(|i| i.url.as_ref()) {
        out.push_str(url);
        out.push('\n');
    }
    for (i, pose) in traj.poses().iter().enumerate() {
        let (ts, dist) = match info {
            Some(info) => (info.timestamps[i], info.distortion[i]),
            None => (i as u64, [0.0, 0.0]),
        };
        let k = pose.intrinsics();
        let r_cw = pose.rotation().transpose();
        let t = -(r_cw * pose.center());
        let mut fields = vec![ts.to_string()];
        fields.extend([k.fx, k.fy, k.cx, k.cy, dist[0], dist[1]].map(number));
        for row in 0..3 {
            for col in 0..3 {
                fields.push(number(r_cw[(row, col)]));
            }
            fields.push(number(t[row]));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

/// Shortest round-trip decimal, without negative zero.
fn number(v: f64) -> String {
    (v + 0.0).to_string()
}
