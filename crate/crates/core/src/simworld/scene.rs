//! Procedural ground-truth world: a textured room with seeded boxes,
//! ray-cast with Lambert shading from a point light.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::frame::{quantize, Frame};
use crate::geometry::CameraPose;

/// Room half extents along x, y, z. World +y points down.
pub const ROOM_HALF: [f64; 3] = [4.0, 1.5, 4.0];

const TEXTURE_CELL: f64 = 0.25;
const FINE_CELL: f64 = 0.07;
const AMBIENT: f64 = 0.35;
const DIFFUSE: f64 = 0.65;
const LIGHT: [f64; 3] = [0.6, -1.2, 0.4];

const FACE_COLORS: [[f64; 3]; 6] = [
    [0.85, 0.55, 0.45],
    [0.45, 0.70, 0.85],
    [0.90, 0.90, 0.80],
    [0.55, 0.45, 0.35],
    [0.55, 0.80, 0.50],
    [0.80, 0.60, 0.85],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    /// Number of boxes placed along the walls.
    pub boxes: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec { seed: 0, boxes: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
    pub color: [f64; 3],
}

impl SceneBox {
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    /// Room face: `2·axis` for the negative side, `2·axis + 1` for the positive one.
    Room(usize),
    Box(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub surface: Surface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    spec: SceneSpec,
    boxes: Vec<SceneBox>,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let boxes = (0..spec.boxes)
            .map(|_| {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = rng.random_range(3.0..3.4);
                let half = Vector3::new(
                    rng.random_range(0.25..0.5),
                    rng.random_range(0.3..1.0),
                    rng.random_range(0.25..0.5),
                );
                let limit_x = ROOM_HALF[0] - 0.05 - half.x;
                let limit_z = ROOM_HALF[2] - 0.05 - half.z;
                let cx = (radius * angle.cos()).clamp(-limit_x, limit_x);
                let cz = (radius * angle.sin()).clamp(-limit_z, limit_z);
                let floor = ROOM_HALF[1];
                SceneBox {
                    min: Vector3::new(cx - half.x, floor - 2.0 * half.y, cz - half.z),
                    max: Vector3::new(cx + half.x, floor, cz + half.z),
                    color: [
                        rng.random_range(0.2..0.95),
                        rng.random_range(0.2..0.95),
                        rng.random_range(0.2..0.95),
                    ],
                }
            })
            .collect();
        Scene { spec, boxes }
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn boxes(&self) -> &[SceneBox] {
        &self.boxes
    }

    /// Largest distance between two points of the room.
    pub fn diameter(&self) -> f64 {
        2.0 * Vector3::from(ROOM_HALF).norm()
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i].abs() < ROOM_HALF[i])
    }

    /// Nearest surface along the ray. `origin` must lie inside the room.
    pub fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Hit {
        let mut best_t = f64::INFINITY;
        let mut axis = 0;
        for i in 0..3 {
            if dir[i] != 0.0 {
                let wall = ROOM_HALF[i].copysign(dir[i]);
                let t = (wall - origin[i]) / dir[i];
                if t < best_t {
                    best_t = t;
                    axis = i;
                }
            }
        }
        let positive = dir[axis] > 0.0;
        let mut normal = Vector3::zeros();
        normal[axis] = if positive { -1.0 } else { 1.0 };
        let mut surface = Surface::Room(2 * axis + usize::from(positive));

        for (k, b) in self.boxes.iter().enumerate() {
            if let Some((t, n)) = slab(origin, dir, b) {
                if t < best_t {
                    best_t = t;
                    normal = n;
                    surface = Surface::Box(k);
                }
            }
        }
        Hit {
            t: best_t,
            point: origin + dir * best_t,
            normal,
            surface,
        }
    }

    /// Shaded color of a surface hit, each channel in [0, 1].
    pub fn shade(&self, hit: &Hit) -> [f64; 3] {
        let base = match hit.surface {
            Surface::Room(face) => FACE_COLORS[face],
            Surface::Box(k) => self.boxes[k].color,
        };
        let p = hit.point;
        let texture = 0.65 * value_noise(self.spec.seed, &(p / TEXTURE_CELL))
            + 0.35 * value_noise(self.spec.seed ^ 0x5bd1_e995, &(p / FINE_CELL));
        let to_light = (Vector3::from(LIGHT) - p).normalize();
        let light = AMBIENT + DIFFUSE * hit.normal.dot(&to_light).max(0.0);
        let albedo = 0.45 + 0.55 * texture;
        base.map(|c| (c * albedo * light).clamp(0.0, 1.0))
    }

    /// Renders `pose` at `width`×`height`, sampling pixel centers.
    pub fn render(&self, pose: &CameraPose, width: u32, height: u32) -> Result<Frame, SimError> {
        let origin = *pose.center();
        if !self.contains(&origin) {
            return Err(SimError::OutsideRoom([origin.x, origin.y, origin.z]));
        }
        let (w, h) = (width as usize, height as usize);
        let mut data = vec![0u8; w * h * 3];
        data.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
            let v = (y as f64 + 0.5) / h as f64;
            for x in 0..w {
                let u = (x as f64 + 0.5) / w as f64;
                let hit = self.trace(&origin, &pose.pixel_ray(u, v));
                let rgb = self.shade(&hit);
                for c in 0..3 {
                    row[x * 3 + c] = quantize(rgb[c]);
                }
            }
        });
        Ok(Frame::new(width, height, data).expect("buffer sized for the image"))
    }
}

/// Entry distance and outward normal of a ray starting outside the box.
fn slab(origin: &Vector3<f64>, dir: &Vector3<f64>, b: &SceneBox) -> Option<(f64, Vector3<f64>)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0;
    for i in 0..3 {
        if dir[i] == 0.0 {
            if origin[i] < b.min[i] || origin[i] > b.max[i] {
                return None;
            }
            continue;
        }
        let t1 = (b.min[i] - origin[i]) / dir[i];
        let t2 = (b.max[i] - origin[i]) / dir[i];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_near {
            t_near = lo;
            axis = i;
        }
        t_far = t_far.min(hi);
    }
    if t_near > t_far || t_near <= 1e-9 {
        return None;
    }
    let mut normal = Vector3::zeros();
    normal[axis] = -dir[axis].signum();
    Some((t_near, normal))
}

fn hash3(seed: u64, x: i64, y: i64, z: i64) -> f64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [x, y, z] {
        h ^= v as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^= h >> 29;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Trilinear value noise in [0, 1) over the integer lattice.
fn value_noise(seed: u64, p: &Vector3<f64>) -> f64 {
    let cell = p.map(f64::floor);
    let f = (p - cell).map(|t| t * t * (3.0 - 2.0 * t));
    let (ix, iy, iz) = (cell.x as i64, cell.y as i64, cell.z as i64);
    let mut acc = 0.0;
    for corner in 0..8 {
        let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
        let wx = if dx == 1 { f.x } else { 1.0 - f.x };
        let wy = if dy == 1 { f.y } else { 1.0 - f.y };
        let wz = if dz == 1 { f.z } else { 1.0 - f.z };
        acc += wx * wy * wz * hash3(seed, ix + dx, iy + dy, iz + dz);
    }
    acc
}
