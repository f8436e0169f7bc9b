//! Camera-aware memory gating for long-horizon video generation.
//!
//! A long video is generated segment by segment. Before each segment the
//! target camera poses are scored against the poses of every frame generated
//! so far ([`gating`]); frames that revisit a known view are conditioned on
//! the best matching stored frame ([`membank`]), others are generated freely.
//!
//! The crate also provides the surrounding tooling: stress-test trajectories
//! and RealEstate10K camera files ([`trajectory`]), a procedural world with a
//! drifting generator stand-in ([`simworld`]), revisit-consistency metrics
//! ([`metrics`]) and a flat run configuration ([`config`]).

pub mod config;
pub mod frame;
pub mod gating;
pub mod geometry;
pub mod membank;
pub mod metrics;
pub mod simworld;
pub mod trajectory;

pub use config::RunConfig;
pub use frame::Frame;
pub use gating::{compute_gates, GateDecision, GateReason, GatingConfig};
pub use geometry::{CameraPose, Intrinsics, OverlapConfig};
pub use membank::{MemoryBank, MemoryEntry};
pub use simworld::{run_episode, EpisodeConfig, EpisodeRecord};
pub use trajectory::Trajectory;
