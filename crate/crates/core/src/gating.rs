//! Camera-aware gating.
//!
//! For every target pose the relevance of each history pose is
//! `c = overlap − λ_d · distance`. The best-scoring history pose becomes the
//! matched reference, and the gate opens unless one of three rules closes it:
//!
//! 1. the best score is below `score_threshold`;
//! 2. the matched reference is farther than `distance_threshold`;
//! 3. the previous target is also gated and matched a reference less than
//!    `temporal_threshold` frames away from this one.
//!
//! Rule 3 runs as a single forward pass and reads the previous gate after
//! its own rule-3 update, so a run of targets matching the same reference
//! alternates open/closed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{translation_distance, CameraPose, FrustumSamples, GeometryError, OverlapConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatingError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid gating config: {0}")]
    InvalidConfig(&'static str),
    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingConfig {
    /// Minimum relevance score for an open gate (τ_c).
    pub score_threshold: f64,
    /// Maximum normalized distance to the matched reference (τ_d).
    pub distance_threshold: f64,
    /// Minimum index spread between references of consecutive open gates (τ_temp).
    pub temporal_threshold: u32,
    pub overlap: OverlapConfig,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig {
            score_threshold: 0.3,
            distance_threshold: 0.6,
            temporal_threshold: 2,
            overlap: OverlapConfig::default(),
        }
    }
}

impl GatingConfig {
    pub fn validate(&self) -> Result<(), GatingError> {
        if !self.score_threshold.is_finite() {
            return Err(GatingError::InvalidConfig("score_threshold must be finite"));
        }
        if !self.distance_threshold.is_finite() {
            return Err(GatingError::InvalidConfig("distance_threshold must be finite"));
        }
        self.overlap.validate()?;
        Ok(())
    }
}

/// Why a gate ended up closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    None,
    LowScore,
    FarDistance,
    TemporalRedundancy,
    EmptyHistory,
    /// Forced closed by a memory-disabled run.
    MemoryDisabled,
}

impl GateReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GateReason::None => "none",
            GateReason::LowScore => "low_score",
            GateReason::FarDistance => "far_distance",
            GateReason::TemporalRedundancy => "temporal_redundancy",
            GateReason::EmptyHistory => "empty_history",
            GateReason::MemoryDisabled => "memory_disabled",
        }
    }
}

impl fmt::Display for GateReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "none" => GateReason::None,
            "low_score" => GateReason::LowScore,
            "far_distance" => GateReason::FarDistance,
            "temporal_redundancy" => GateReason::TemporalRedundancy,
            "empty_history" => GateReason::EmptyHistory,
            "memory_disabled" => GateReason::MemoryDisabled,
            other => return Err(format!("unknown gate reason `{other}`")),
        })
    }
}

/// Gate outcome for one target frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    /// Target frame index.
    pub target: usize,
    /// Best relevance score; 0 when there is no history.
    pub score: f64,
    /// Index of the best-scoring history pose, kept even when the gate is closed.
    pub matched: Option<usize>,
    pub gate: bool,
    pub reason: GateReason,
}

impl GateDecision {
    /// Matched reference of an open gate.
    pub fn active_reference(&self) -> Option<usize> {
        if self.gate {
            self.matched
        } else {
            None
        }
    }
}

/// Relevance scores and normalized distances, `targets × history`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
    distances: Vec<f64>,
}

impl RelevanceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn score(&self, t: usize, r: usize) -> f64 {
        self.scores[t * self.cols + r]
    }

    pub fn distance(&self, t: usize, r: usize) -> f64 {
        self.distances[t * self.cols + r]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.scores[t * self.cols..(t + 1) * self.cols]
    }

    /// Index and value of the row maximum; ties go to the smallest index.
    pub fn best(&self, t: usize) -> Option<(usize, f64)> {
        argmax(self.row(t))
    }
}

fn argmax(row: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (r, &c) in row.iter().enumerate() {
        match best {
            Some((_, b)) if c <= b => {}
            _ => best = Some((r, c)),
        }
    }
    best
}

/// `c[t][r] = fov_overlap(t, r) − λ_d · translation_distance(t, r)`.
pub fn relevance_matrix(
    targets: &[CameraPose],
    history: &[CameraPose],
    cfg: &GatingConfig,
) -> RelevanceMatrix {
    let ov = &cfg.overlap;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = targets
        .par_iter()
        .map(|target| {
            let samples = FrustumSamples::new(target, ov);
            history
                .iter()
                .map(|h| {
                    let d = translation_distance(target, h, ov);
                    (samples.overlap_with(h) - ov.distance_weight * d, d)
                })
                .unzip()
        })
        .collect();
    let mut scores = Vec::with_capacity(targets.len() * history.len());
    let mut distances = Vec::with_capacity(targets.len() * history.len());
    for (s, d) in rows {
        scores.extend(s);
        distances.extend(d);
    }
    RelevanceMatrix {
        rows: targets.len(),
        cols: history.len(),
        scores,
        distances,
    }
}

/// Runs all three gating rules on `targets` against `history`.
///
/// `matched` indexes into `history`; `target` indexes into `targets`.
pub fn compute_gates(
    targets: &[CameraPose],
    history: &[CameraPose],
    cfg: &GatingConfig,
) -> Vec<GateDecision> {
    compute_gates_after(None, targets, history, cfg)
}

/// Like [`compute_gates`], with rule 3 for the first target checked against
/// `previous`, the last decision of the preceding segment.
///
/// `previous.matched` must index the same history ordering.
pub fn compute_gates_after(
    previous: Option<&GateDecision>,
    targets: &[CameraPose],
    history: &[CameraPose],
    cfg: &GatingConfig,
) -> Vec<GateDecision> {
    let mut decisions: Vec<GateDecision> = if history.is_empty() {
        (0..targets.len())
            .map(|t| GateDecision {
                target: t,
                score: 0.0,
                matched: None,
                gate: false,
                reason: GateReason::EmptyHistory,
            })
            .collect()
    } else {
        let matrix = relevance_matrix(targets, history, cfg);
        (0..targets.len())
            .map(|t| {
                let (r, score) = matrix.best(t).expect("history is non-empty");
                let reason = if score < cfg.score_threshold {
                    GateReason::LowScore
                } else if matrix.distance(t, r) > cfg.distance_threshold {
                    GateReason::FarDistance
                } else {
                    GateReason::None
                };
                GateDecision {
                    target: t,
                    score,
                    matched: Some(r),
                    gate: reason == GateReason::None,
                    reason,
                }
            })
            .collect()
    };
    apply_temporal_filter(&mut decisions, previous, cfg.temporal_threshold);
    decisions
}

/// Rule 3, in place, single forward pass.
pub fn apply_temporal_filter(
    decisions: &mut [GateDecision],
    previous: Option<&GateDecision>,
    temporal_threshold: u32,
) {
    let mut prev = previous.copied();
    for d in decisions.iter_mut() {
        if let (Some(p), Some(r)) = (prev.and_then(|p| p.active_reference()), d.active_reference()) {
            if r.abs_diff(p) < temporal_threshold as usize {
                d.gate = false;
                d.reason = GateReason::TemporalRedundancy;
            }
        }
        prev = Some(*d);
    }
}

/// Positions `t ≥ 1` where two consecutive open gates match references
/// closer than `temporal_threshold`. Empty for every trace this module emits.
pub fn temporal_violations(decisions: &[GateDecision], temporal_threshold: u32) -> Vec<usize> {
    decisions
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| match (w[0].active_reference(), w[1].active_reference()) {
            (Some(a), Some(b)) if a.abs_diff(b) < temporal_threshold as usize => Some(i + 1),
            _ => None,
        })
        .collect()
}

const TRACE_HEADER: &str = "# t, s_t, r_star, g_t, reason";

/// One line per decision: `t, s_t, r_star (or -), g_t, reason`.
pub fn format_trace(decisions: &[GateDecision]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for d in decisions {
        let matched = d.matched.map_or_else(|| "-".to_string(), |r| r.to_string());
        out.push_str(&format!(
            "{}, {}, {}, {}, {}\n",
            d.target,
            d.score,
            matched,
            u8::from(d.gate),
            d.reason
        ));
    }
    out
}

/// Parses [`format_trace`] output. Blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<GateDecision>, GatingError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| GatingError::Trace {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let target = fields[0]
            .parse()
            .map_err(|e| bad(format!("target index: {e}")))?;
        let score = fields[1].parse().map_err(|e| bad(format!("score: {e}")))?;
        let matched = match fields[2] {
            "-" => None,
            s => Some(s.parse().map_err(|e| bad(format!("reference: {e}")))?),
        };
        let gate = match fields[3] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("gate must be 0 or 1, found `{other}`"))),
        };
        let reason = fields[4].parse().map_err(bad)?;
        out.push(GateDecision {
            target,
            score,
            matched,
            gate,
            reason,
        });
    }
    Ok(out)
}
