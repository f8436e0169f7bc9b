//! Simulation world standing in for a video backbone: a procedural scene
//! that renders ground truth for any pose, a generator whose memory-free
//! frames drift away from it, and the segment loop that ties gating, the
//! memory bank and generation together.
//!
//! The generator is not a model of any neural network. It exists so the
//! effect of gating on revisit consistency can be measured.

mod episode;
mod generator;
mod scene;

pub use episode::{run_episode, EpisodeConfig, EpisodeFrame, EpisodeRecord, SegmentSummary};
pub use generator::{drift_noise, generate_segment, DriftConfig, GeneratedFrame};
pub use scene::{Hit, Scene, SceneBox, SceneSpec, Surface, ROOM_HALF};

use thiserror::Error;

use crate::frame::FrameError;
use crate::gating::GatingError;
use crate::membank::MemoryError;
use crate::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("camera center ({}, {}, {}) is outside the room", .0[0], .0[1], .0[2])]
    OutsideRoom([f64; 3]),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("decisions do not fit the segment: {0}")]
    DecisionMismatch(String),
    #[error("malformed episode: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Gating(#[from] GatingError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}
