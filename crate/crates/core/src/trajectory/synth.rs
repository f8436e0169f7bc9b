//! Training-pair synthesis from ordinary videos: frame reordering into
//! pseudo-loops, strided history references, and history dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrajectoryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    /// `0..N−1` then back `N−2..0`.
    ForwardBackward,
}

/// A history reference (absent after dropout) and the frame to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub history: Option<usize>,
    pub target: usize,
    pub stride: usize,
    /// Position of the target in the reordered sequence.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLoop {
    pub kind: LoopKind,
    pub frames: usize,
    pub stride: usize,
    /// Original frame index at each position of the synthesized sequence.
    pub order: Vec<usize>,
    pub pairs: Vec<TrainingPair>,
}

/// Reorders `frames` video frames into a loop and pairs every return-pass
/// target `g` with history `g + δ`, or `g − δ` when that runs off the end.
pub fn synth_pseudo_loop(
    frames: usize,
    stride: usize,
    kind: LoopKind,
) -> Result<PseudoLoop, TrajectoryError> {
    if frames < 2 {
        return Err(TrajectoryError::InvalidParams(format!(
            "need at least 2 frames, got {frames}"
        )));
    }
    if stride == 0 {
        return Err(TrajectoryError::ZeroStride);
    }
    if stride >= frames {
        return Err(TrajectoryError::StrideTooLarge { stride, frames });
    }
    let order: Vec<usize> = match kind {
        LoopKind::ForwardBackward => (0..frames).chain((0..frames - 1).rev()).collect(),
    };
    let pairs = order
        .iter()
        .enumerate()
        .skip(frames)
        .map(|(position, &g)| {
            let h = if g + stride < frames {
                g + stride
            } else if g >= stride {
                g - stride
            } else {
                frames - 1
            };
            TrainingPair {
                history: Some(h),
                target: g,
                stride,
                position,
            }
        })
        .collect();
    Ok(PseudoLoop {
        kind,
        frames,
        stride,
        order,
        pairs,
    })
}

/// Drops each history independently with probability `rate`.
pub fn apply_history_dropout(
    pairs: &[TrainingPair],
    rate: f64,
    seed: u64,
) -> Result<Vec<TrainingPair>, TrajectoryError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(TrajectoryError::InvalidRate(rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pairs
        .iter()
        .map(|p| {
            let drop = rng.random_bool(rate);
            TrainingPair {
                history: if drop { None } else { p.history },
                ..*p
            }
        })
        .collect())
}
