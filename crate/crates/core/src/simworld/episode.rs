//! Segment-by-segment rollout over a trajectory, and the episode directory
//! format.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generator::{generate_segment, DriftConfig};
use super::scene::{Scene, SceneSpec};
use super::SimError;
use crate::frame::{fnv1a64, Frame};
use crate::gating::{compute_gates_after, format_trace, GateDecision, GateReason, GatingConfig};
use crate::geometry::CameraPose;
use crate::membank::{build_hybrid, build_mask, expected_mask_population, MemoryBank, MemoryEntry};
use crate::trajectory::Trajectory;

const EPISODE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub scene: SceneSpec,
    pub gating: GatingConfig,
    pub drift: DriftConfig,
    /// Temporal memory window half-width, frames.
    pub window: usize,
    /// Token patch size, pixels.
    pub patch: usize,
    pub seed: u64,
    /// When false every gate is forced closed after gating.
    pub memory: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            scene: SceneSpec::default(),
            gating: GatingConfig::default(),
            drift: DriftConfig::default(),
            window: 2,
            patch: 16,
            seed: 0,
            memory: true,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.gating.validate()?;
        self.drift.validate()?;
        if self.patch == 0 {
            return Err(SimError::InvalidConfig("patch must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFrame {
    pub pose: CameraPose,
    pub ground_truth: Frame,
    pub generated: Frame,
    /// Decision with `target` and `matched` as global frame indices.
    pub decision: GateDecision,
    pub steps_since_anchor: usize,
}

/// Memory usage of one generated segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub start: usize,
    pub end: usize,
    /// Last frame of the previous segment.
    pub previous_frame: Option<usize>,
    pub active: usize,
    pub references: Vec<usize>,
    pub memory_tokens: usize,
    pub mask_rows: usize,
    pub mask_true: usize,
    pub mask_expected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub config: EpisodeConfig,
    pub trajectory: Trajectory,
    pub frames: Vec<EpisodeFrame>,
    pub segments: Vec<SegmentSummary>,
    /// Every generated frame, in order.
    pub bank: MemoryBank,
}

impl EpisodeRecord {
    pub fn decisions(&self) -> Vec<GateDecision> {
        self.frames.iter().map(|f| f.decision).collect()
    }

    pub fn generated(&self) -> Vec<&Frame> {
        self.frames.iter().map(|f| &f.generated).collect()
    }

    /// Gate trace in the text format of [`format_trace`].
    pub fn trace(&self) -> String {
        format_trace(&self.decisions())
    }
}

/// Rolls out `traj`: the initial frame from an empty memory, then each
/// segment gated against every frame generated so far.
pub fn run_episode(traj: &Trajectory, cfg: &EpisodeConfig) -> Result<EpisodeRecord, SimError> {
    cfg.validate()?;
    let scene = Scene::new(cfg.scene);
    let mut bank = MemoryBank::new();
    let mut frames: Vec<EpisodeFrame> = Vec::with_capacity(traj.len());
    let mut segments = Vec::new();
    let mut previous: Option<GateDecision> = None;
    let mut steps = 0;

    for range in traj.segments() {
        let poses = &traj.poses()[range.clone()];
        // Bank positions coincide with frame indices: frames enter in order.
        let mut decisions = compute_gates_after(previous.as_ref(), poses, &bank.poses(), &cfg.gating);
        previous = decisions.last().copied();
        for d in &mut decisions {
            d.target += range.start;
            if !cfg.memory && d.gate {
                d.gate = false;
                d.reason = GateReason::MemoryDisabled;
            }
        }

        let hybrid = build_hybrid(&bank, &decisions, cfg.window, cfg.patch)?;
        let (w, h) = (poses[0].width() as usize, poses[0].height() as usize);
        let query_tokens = w.div_ceil(cfg.patch) * h.div_ceil(cfg.patch);
        let mask = build_mask(&decisions, &hybrid, query_tokens)?;
        let mut references: Vec<usize> = decisions.iter().filter_map(|d| d.active_reference()).collect();
        references.sort_unstable();
        references.dedup();
        segments.push(SegmentSummary {
            start: range.start,
            end: range.end,
            previous_frame: range.start.checked_sub(1),
            active: decisions.iter().filter(|d| d.gate).count(),
            references,
            memory_tokens: hybrid.len(),
            mask_rows: mask.rows(),
            mask_true: mask.count_true(),
            mask_expected: expected_mask_population(&decisions, &hybrid, query_tokens),
        });

        let generated = generate_segment(
            &scene,
            poses,
            range.start,
            &decisions,
            &bank,
            &cfg.drift,
            cfg.seed,
            steps,
        )?;
        for ((g, d), pose) in generated.into_iter().zip(decisions).zip(poses) {
            steps = g.steps_since_anchor;
            frames.push(EpisodeFrame {
                pose: pose.clone(),
                ground_truth: g.ground_truth,
                generated: g.frame,
                decision: d,
                steps_since_anchor: g.steps_since_anchor,
            });
        }
        for f in &frames[range] {
            bank.insert(MemoryEntry {
                index: f.decision.target,
                pose: f.pose.clone(),
                frame: f.generated.clone(),
            })?;
        }
    }
    Ok(EpisodeRecord {
        config: *cfg,
        trajectory: traj.clone(),
        frames,
        segments,
        bank,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeFile {
    version: u32,
    config: EpisodeConfig,
    trajectory: serde_json::Value,
    frames: Vec<FrameRow>,
    segments: Vec<SegmentSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRow {
    decision: GateDecision,
    steps_since_anchor: usize,
    ground_truth: String,
    generated: String,
}

fn frame_name(i: usize) -> String {
    format!("{i:06}.ppm")
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |e| SimError::Io(format!("{}: {e}", path.display()))
}

impl EpisodeRecord {
    /// Writes `episode.json`, `gt/`, `gen/` and `bank/` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SimError> {
        for sub in ["gt", "gen"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io(&p))?;
        }
        let mut rows = Vec::with_capacity(self.frames.len());
        for (i, f) in self.frames.iter().enumerate() {
            f.ground_truth.write_ppm(&dir.join("gt").join(frame_name(i)))?;
            f.generated.write_ppm(&dir.join("gen").join(frame_name(i)))?;
            rows.push(FrameRow {
                decision: f.decision,
                steps_since_anchor: f.steps_since_anchor,
                ground_truth: format!("{:016x}", fnv1a64(f.ground_truth.as_bytes())),
                generated: format!("{:016x}", fnv1a64(f.generated.as_bytes())),
            });
        }
        self.bank.save(&dir.join("bank"))?;
        let file = EpisodeFile {
            version: EPISODE_VERSION,
            config: self.config,
            trajectory: serde_json::from_str(&self.trajectory.to_json())
                .expect("trajectory JSON is valid"),
            frames: rows,
            segments: self.segments.clone(),
        };
        let path = dir.join("episode.json");
        let text = serde_json::to_string_pretty(&file).expect("episode serializes");
        fs::write(&path, text + "\n").map_err(io(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SimError> {
        let path = dir.join("episode.json");
        let text = fs::read_to_string(&path).map_err(io(&path))?;
        let file: EpisodeFile = serde_json::from_str(&text)
            .map_err(|e| SimError::Format(format!("{}: {e}", path.display())))?;
        if file.version != EPISODE_VERSION {
            return Err(SimError::Format(format!("unsupported episode version {}", file.version)));
        }
        let trajectory = Trajectory::from_json(&file.trajectory.to_string())?;
        if trajectory.len() != file.frames.len() {
            return Err(SimError::Format(format!(
                "{} frames recorded for a {}-pose trajectory",
                file.frames.len(),
                trajectory.len()
            )));
        }
        let mut frames = Vec::with_capacity(file.frames.len());
        for (i, (row, pose)) in file.frames.into_iter().zip(trajectory.poses()).enumerate() {
            let read = |sub: &str, checksum: &str| -> Result<Frame, SimError> {
                let p = dir.join(sub).join(frame_name(i));
                let frame = Frame::read_ppm(&p)?;
                let actual = format!("{:016x}", fnv1a64(frame.as_bytes()));
                if actual != checksum {
                    return Err(SimError::Format(format!(
                        "{}: checksum {actual} does not match recorded {checksum}",
                        p.display()
                    )));
                }
                Ok(frame)
            };
            frames.push(EpisodeFrame {
                pose: pose.clone(),
                ground_truth: read("gt", &row.ground_truth)?,
                generated: read("gen", &row.generated)?,
                decision: row.decision,
                steps_since_anchor: row.steps_since_anchor,
            });
        }
        Ok(EpisodeRecord {
            config: file.config,
            trajectory,
            frames,
            segments: file.segments,
            bank: MemoryBank::load(&dir.join("bank"))?,
        })
    }
}
