//! Independent reference implementations used as test oracles. Nothing here
//! calls into the scoring, gating or mask code under test; poses are read
//! through their public accessors only.

#![allow(dead_code)]

use memgate::gating::{GateDecision, GatingConfig};
use memgate::geometry::{CameraPose, Intrinsics};
use memgate::membank::{BlockKind, HybridMemory};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;

type M3 = [[f64; 3]; 3];
type V3 = [f64; 3];

fn rows(p: &CameraPose) -> (M3, V3) {
    let r = p.rotation();
    let c = p.center();
    (
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
        [c.x, c.y, c.z],
    )
}

/// World point of normalized pixel `(u, v)` at camera depth `depth`.
pub fn unproject(p: &CameraPose, u: f64, v: f64, depth: f64) -> V3 {
    let (r, c) = rows(p);
    let k = p.intrinsics();
    let local = [(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth];
    let mut w = [0.0; 3];
    for i in 0..3 {
        w[i] = r[i][0] * local[0] + r[i][1] * local[1] + r[i][2] * local[2] + c[i];
    }
    w
}

/// `(u, v, depth)` of a world point, by explicit `Rᵀ(x − c)`.
pub fn project(p: &CameraPose, x: V3) -> (f64, f64, f64) {
    let (r, c) = rows(p);
    let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
    let mut cam = [0.0; 3];
    for (j, v) in cam.iter_mut().enumerate() {
        *v = r[0][j] * d[0] + r[1][j] * d[1] + r[2][j] * d[2];
    }
    let k = p.intrinsics();
    (
        k.fx * cam[0] / cam[2] + k.cx,
        k.fy * cam[1] / cam[2] + k.cy,
        cam[2],
    )
}

fn visible(history: &CameraPose, x: V3) -> bool {
    let (u, v, z) = project(history, x);
    z > 0.0 && (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v)
}

pub fn grid_overlap(target: &CameraPose, history: &CameraPose, grid: usize, depth: f64) -> f64 {
    let mut hits = 0usize;
    for j in 0..grid {
        for i in 0..grid {
            let u = (i as f64 + 0.5) / grid as f64;
            let v = (j as f64 + 0.5) / grid as f64;
            if visible(history, unproject(target, u, v, depth)) {
                hits += 1;
            }
        }
    }
    hits as f64 / (grid * grid) as f64
}

/// Overlap estimated from `rays` uniformly random target pixels.
pub fn monte_carlo_overlap(
    target: &CameraPose,
    history: &CameraPose,
    depth: f64,
    rays: usize,
    rng: &mut impl Rng,
) -> f64 {
    let hits = (0..rays)
        .filter(|_| {
            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            visible(history, unproject(target, u, v, depth))
        })
        .count();
    hits as f64 / rays as f64
}

/// Straight-line transcription of the three-step gating algorithm.
/// Returns `(score, matched, gate)` per target.
pub fn reference_gates(
    targets: &[CameraPose],
    history: &[CameraPose],
    cfg: &GatingConfig,
) -> Vec<(f64, Option<usize>, bool)> {
    let ov = &cfg.overlap;
    let mut out: Vec<(f64, Option<usize>, bool)> = Vec::new();
    for t in targets {
        if history.is_empty() {
            out.push((0.0, None, false));
            continue;
        }
        let mut best_r = 0;
        let mut best_c = f64::NEG_INFINITY;
        let mut best_d = 0.0;
        for (r, h) in history.iter().enumerate() {
            let rho = grid_overlap(t, h, ov.grid, ov.sample_depth);
            let (a, b) = (t.center(), h.center());
            let dist = (((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
                / ov.scene_diameter)
                .min(1.0);
            let c = rho - ov.distance_weight * dist;
            if c > best_c {
                best_c = c;
                best_r = r;
                best_d = dist;
            }
        }
        let mut g = true;
        if best_c < cfg.score_threshold {
            g = false;
        }
        if best_d > cfg.distance_threshold {
            g = false;
        }
        out.push((best_c, Some(best_r), g));
    }
    for t in 1..out.len() {
        if out[t].2 && out[t - 1].2 {
            let (a, b) = (out[t].1.unwrap(), out[t - 1].1.unwrap());
            if (a as i64 - b as i64).abs() < cfg.temporal_threshold as i64 {
                out[t].2 = false;
            }
        }
    }
    out
}

/// Expected visibility of every memory column for every query row, decided
/// token by token from the invariants of the mask.
pub fn naive_mask(
    decisions: &[GateDecision],
    hybrid: &HybridMemory,
    tokens_per_query_frame: usize,
    window: usize,
) -> Vec<Vec<bool>> {
    let mut rows = Vec::new();
    for d in decisions {
        let mut row = vec![false; hybrid.len()];
        if d.gate {
            let r = d.matched.unwrap();
            for (col, cell) in row.iter_mut().enumerate() {
                let block = hybrid.block_of(col);
                let src = hybrid.sources()[col];
                *cell = block.reference == r
                    && match block.kind {
                        BlockKind::Spatial => src == r,
                        BlockKind::Temporal => src + window >= r && src <= r + window,
                    };
            }
        }
        for _ in 0..tokens_per_query_frame {
            rows.push(row.clone());
        }
    }
    rows
}

/// Uniformly random rotation from a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    loop {
        let q: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            return Matrix3::new(
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            );
        }
    }
}

pub fn random_intrinsics(rng: &mut impl Rng) -> Intrinsics {
    Intrinsics::from_hfov(rng.random_range(40.0..100.0), 64, 48)
}

pub fn random_pose(rng: &mut impl Rng, intrinsics: Intrinsics, spread: f64) -> CameraPose {
    let c = Vector3::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
    );
    CameraPose::new(random_rotation(rng), c, intrinsics, 64, 48).unwrap()
}

/// `base` turned by yaw/pitch/roll (degrees) about its own axes and moved by `shift`.
pub fn perturbed(base: &CameraPose, yaw: f64, pitch: f64, roll: f64, shift: Vector3<f64>) -> CameraPose {
    let local = memgate::geometry::rotation_from_euler(yaw.to_radians(), pitch.to_radians(), roll.to_radians());
    CameraPose::new(
        base.rotation() * local,
        base.center() + shift,
        *base.intrinsics(),
        base.width(),
        base.height(),
    )
    .unwrap()
}
