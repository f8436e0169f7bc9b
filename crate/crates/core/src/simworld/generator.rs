//! Stand-in for the video backbone: renders ground truth, adds seeded drift
//! noise to memory-free frames, and blends the matched memory frame into
//! gated ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::Scene;
use super::SimError;
use crate::frame::{quantize, Frame};
use crate::gating::GateDecision;
use crate::geometry::CameraPose;
use crate::membank::MemoryBank;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// Noise standard deviation added per generated step, channel units.
    pub sigma0: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig { sigma0: 0.01 }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "sigma0 must be a non-negative number, got {}",
                self.sigma0
            )));
        }
        Ok(())
    }

    /// Noise level of memory-free frame `index`: the backbone has rolled out
    /// `index + 1` frames by then.
    pub fn sigma_at(&self, index: usize) -> f64 {
        self.sigma0 * (index + 1) as f64
    }
}

/// Pre-clamp drift noise for frame `index`: `len` samples of N(0, σ²),
/// reproducible from `(seed, index)` alone.
pub fn drift_noise(seed: u64, index: usize, sigma: f64, len: usize) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    normal.sample_iter(&mut rng).take(len).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFrame {
    pub ground_truth: Frame,
    pub frame: Frame,
    pub steps_since_anchor: usize,
}

/// Generates one segment.
///
/// `first_index` is the global index of `poses[0]`; `decisions[i].matched`
/// are bank frame indices. `steps_before` is the anchor counter carried from
/// the previous segment.
#[allow(clippy::too_many_arguments)]
pub fn generate_segment(
    scene: &Scene,
    poses: &[CameraPose],
    first_index: usize,
    decisions: &[GateDecision],
    bank: &MemoryBank,
    drift: &DriftConfig,
    seed: u64,
    steps_before: usize,
) -> Result<Vec<GeneratedFrame>, SimError> {
    if decisions.len() != poses.len() {
        return Err(SimError::DecisionMismatch(format!(
            "{} decisions for {} poses",
            decisions.len(),
            poses.len()
        )));
    }
    for d in decisions {
        if let Some(r) = d.active_reference() {
            if bank.get(r).is_none() {
                return Err(SimError::DecisionMismatch(format!(
                    "target {} references frame {r}, which is not in the bank",
                    d.target
                )));
            }
        }
    }
    let truths = poses
        .par_iter()
        .map(|p| scene.render(p, p.width(), p.height()))
        .collect::<Result<Vec<_>, _>>()?;

    let mut steps = steps_before;
    let mut out = Vec::with_capacity(poses.len());
    for (i, (gt, d)) in truths.into_iter().zip(decisions).enumerate() {
        let index = first_index + i;
        let frame = match d.active_reference() {
            Some(r) => {
                steps = 0;
                let stored = &bank.get(r).expect("checked above").frame;
                gt.same_size(stored)?;
                let s = d.score.clamp(0.0, 1.0);
                let values: Vec<f64> = stored
                    .as_bytes()
                    .iter()
                    .zip(gt.as_bytes())
                    .map(|(&m, &g)| (s * m as f64 + (1.0 - s) * g as f64) / 255.0)
                    .collect();
                Frame::from_unit(gt.width(), gt.height(), &values)?
            }
            None => {
                steps += 1;
                let noise = drift_noise(seed, index, drift.sigma_at(index), gt.as_bytes().len());
                let data = gt
                    .as_bytes()
                    .iter()
                    .zip(&noise)
                    .map(|(&g, n)| quantize(g as f64 / 255.0 + n))
                    .collect();
                Frame::new(gt.width(), gt.height(), data)?
            }
        };
        out.push(GeneratedFrame {
            ground_truth: gt,
            frame,
            steps_since_anchor: steps,
        });
    }
    Ok(out)
}
