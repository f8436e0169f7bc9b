//! Append-only memory of generated frames and their poses, hybrid memory
//! token assembly, and per-frame cross-attention masks.
//!
//! The token encoder is a stand-in: each token is the mean RGB of one
//! `patch × patch` tile of a frame. What matters here is which frames
//! contribute tokens to which block and which query rows may see them.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{fnv1a64, Frame, FrameError};
use crate::gating::{compute_gates, GateDecision, GatingConfig};
use crate::geometry::CameraPose;

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("frame index {index} is not greater than the last stored index {last}")]
    OutOfOrder { index: usize, last: usize },
    #[error("frame is {got_w}x{got_h}, bank holds {want_w}x{want_h} frames")]
    DimensionMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("reference frame {0} is not in the memory bank")]
    MissingReference(usize),
    #[error("decision for target {target} references frame {reference}, which has no tokens")]
    UnattributedReference { target: usize, reference: usize },
    #[error("patch size must be at least 1")]
    ZeroPatch,
    #[error("tokens per query frame must be at least 1")]
    ZeroQueryTokens,
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("checksum mismatch for frame {index} ({file}): manifest {expected:016x}, file {actual:016x}")]
    Checksum {
        index: usize,
        file: String,
        expected: u64,
        actual: u64,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MemoryError + '_ {
    move |source| MemoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub index: usize,
    pub pose: CameraPose,
    pub frame: Frame,
}

/// Frames in strictly increasing index order, all of one size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryBank {
    entries: Vec<MemoryEntry>,
}

impl MemoryBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    /// `(width, height)` of stored frames, if any.
    pub fn frame_size(&self) -> Option<(u32, u32)> {
        self.entries
            .first()
            .map(|e| (e.frame.width(), e.frame.height()))
    }

    pub fn insert(&mut self, entry: MemoryEntry) -> Result<(), MemoryError> {
        if let Some(last) = self.entries.last() {
            if entry.index <= last.index {
                return Err(MemoryError::OutOfOrder {
                    index: entry.index,
                    last: last.index,
                });
            }
        }
        if let Some((w, h)) = self.frame_size() {
            if entry.frame.width() != w || entry.frame.height() != h {
                return Err(MemoryError::DimensionMismatch {
                    got_w: entry.frame.width(),
                    got_h: entry.frame.height(),
                    want_w: w,
                    want_h: h,
                });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<&MemoryEntry> {
        self.entries
            .binary_search_by_key(&index, |e| e.index)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn poses(&self) -> Vec<CameraPose> {
        self.entries.iter().map(|e| e.pose.clone()).collect()
    }

    /// Stored indices within `[lo, hi]`.
    pub fn indices_in(&self, lo: usize, hi: usize) -> Vec<usize> {
        let start = self.entries.partition_point(|e| e.index < lo);
        self.entries[start..]
            .iter()
            .take_while(|e| e.index <= hi)
            .map(|e| e.index)
            .collect()
    }

    /// Gates `targets` against the stored poses; `matched` holds frame
    /// indices rather than bank positions.
    pub fn gate(&self, targets: &[CameraPose], cfg: &GatingConfig) -> Vec<GateDecision> {
        let mut decisions = compute_gates(targets, &self.poses(), cfg);
        for d in &mut decisions {
            d.matched = d.matched.map(|pos| self.entries[pos].index);
        }
        decisions
    }

    /// Writes `manifest.json` and `frames/{index:06}.ppm` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), MemoryError> {
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
        let mut records = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let file = format!("frames/{:06}.ppm", e.index);
            let bytes = e.frame.to_ppm();
            let path = dir.join(&file);
            fs::write(&path, &bytes).map_err(io_err(&path))?;
            records.push(EntryRecord {
                index: e.index,
                pose: e.pose.clone(),
                file,
                checksum: format!("{:016x}", fnv1a64(&bytes)),
            });
        }
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            width: self.frame_size().map(|s| s.0),
            height: self.frame_size().map(|s| s.1),
            entries: records,
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let path = dir.join("manifest.json");
        fs::write(&path, json).map_err(io_err(&path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, MemoryError> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| MemoryError::Manifest(e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(MemoryError::Manifest(format!(
                "unsupported version {}",
                manifest.version
            )));
        }
        let mut bank = MemoryBank::new();
        for rec in manifest.entries {
            let expected = u64::from_str_radix(&rec.checksum, 16)
                .map_err(|_| MemoryError::Manifest(format!("bad checksum `{}`", rec.checksum)))?;
            let path = dir.join(&rec.file);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let actual = fnv1a64(&bytes);
            if actual != expected {
                return Err(MemoryError::Checksum {
                    index: rec.index,
                    file: rec.file,
                    expected,
                    actual,
                });
            }
            let frame = Frame::from_ppm(&bytes)?;
            bank.insert(MemoryEntry {
                index: rec.index,
                pose: rec.pose,
                frame,
            })?;
        }
        if let (Some((w, h)), Some(mw), Some(mh)) = (bank.frame_size(), manifest.width, manifest.height) {
            if (w, h) != (mw, mh) {
                return Err(MemoryError::Manifest(format!(
                    "manifest declares {mw}x{mh} frames, files hold {w}x{h}"
                )));
            }
        }
        Ok(bank)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    version: u32,
    width: Option<u32>,
    height: Option<u32>,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRecord {
    index: usize,
    pose: CameraPose,
    file: String,
    checksum: String,
}

/// Mean-RGB descriptor of every `patch × patch` tile, row-major over tiles.
/// Edge tiles average the pixels they cover.
pub fn patch_descriptors(frame: &Frame, patch: usize) -> Vec<[f64; 3]> {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let bytes = frame.as_bytes();
    let mut out = Vec::with_capacity(w.div_ceil(patch) * h.div_ceil(patch));
    for ty in (0..h).step_by(patch) {
        for tx in (0..w).step_by(patch) {
            let mut sum = [0u64; 3];
            let mut n = 0u64;
            for y in ty..(ty + patch).min(h) {
                for x in tx..(tx + patch).min(w) {
                    let i = (y * w + x) * 3;
                    for c in 0..3 {
                        sum[c] += bytes[i + c] as u64;
                    }
                    n += 1;
                }
            }
            out.push(sum.map(|s| s as f64 / (n as f64 * 255.0)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Tokens of the single retrieved frame.
    Spatial,
    /// Tokens of the consecutive-frame window around the retrieved frame.
    Temporal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBlock {
    pub kind: BlockKind,
    /// Matched reference frame this block was built for.
    pub reference: usize,
    /// Source frames, ascending.
    pub frames: Vec<usize>,
    /// Token positions in the hybrid memory.
    pub tokens: Range<usize>,
}

/// Spatial and temporal token blocks for every distinct active reference.
///
/// Blocks are ordered by reference, spatial before temporal. Overlapping
/// temporal windows of different references duplicate their tokens.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HybridMemory {
    tokens_per_frame: usize,
    blocks: Vec<TokenBlock>,
    sources: Vec<usize>,
    descriptors: Vec<[f64; 3]>,
}

impl HybridMemory {
    pub fn tokens_per_frame(&self) -> usize {
        self.tokens_per_frame
    }

    pub fn blocks(&self) -> &[TokenBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Source frame of each token.
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn descriptors(&self) -> &[[f64; 3]] {
        &self.descriptors
    }

    pub fn block(&self, reference: usize, kind: BlockKind) -> Option<&TokenBlock> {
        self.blocks
            .iter()
            .find(|b| b.reference == reference && b.kind == kind)
    }

    /// Block containing token `i`.
    pub fn block_of(&self, token: usize) -> &TokenBlock {
        let i = self.blocks.partition_point(|b| b.tokens.end <= token);
        &self.blocks[i]
    }

    /// Token descriptors flattened to little-endian bytes, for determinism checks.
    pub fn token_bytes(&self) -> Vec<u8> {
        self.descriptors
            .iter()
            .flat_map(|d| d.iter().flat_map(|v| v.to_le_bytes()))
            .collect()
    }
}

/// Assembles spatial (`K^s`) and temporal (`K^t`) token blocks for the
/// references of all open gates. `decisions[i].matched` are bank frame indices.
pub fn build_hybrid(
    bank: &MemoryBank,
    decisions: &[GateDecision],
    window: usize,
    patch: usize,
) -> Result<HybridMemory, MemoryError> {
    if patch == 0 {
        return Err(MemoryError::ZeroPatch);
    }
    let references: BTreeSet<usize> = decisions.iter().filter_map(|d| d.active_reference()).collect();
    let mut hybrid = HybridMemory::default();
    if references.is_empty() {
        return Ok(hybrid);
    }
    let (w, h) = bank.frame_size().ok_or(MemoryError::MissingReference(
        *references.first().expect("non-empty"),
    ))?;
    hybrid.tokens_per_frame = (w as usize).div_ceil(patch) * (h as usize).div_ceil(patch);

    for &r in &references {
        if bank.get(r).is_none() {
            return Err(MemoryError::MissingReference(r));
        }
        let window_frames = bank.indices_in(r.saturating_sub(window), r.saturating_add(window));
        for (kind, frames) in [(BlockKind::Spatial, vec![r]), (BlockKind::Temporal, window_frames)] {
            let start = hybrid.sources.len();
            for &f in &frames {
                let entry = bank.get(f).expect("index came from the bank");
                let tokens = patch_descriptors(&entry.frame, patch);
                hybrid.sources.extend(std::iter::repeat_n(f, tokens.len()));
                hybrid.descriptors.extend(tokens);
            }
            hybrid.blocks.push(TokenBlock {
                kind,
                reference: r,
                frames,
                tokens: start..hybrid.sources.len(),
            });
        }
    }
    Ok(hybrid)
}

/// Boolean (query token × memory token) mask with per-frame row groups.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMask {
    rows: usize,
    cols: usize,
    tokens_per_query_frame: usize,
    bits: Vec<bool>,
}

impl AttentionMask {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tokens_per_query_frame(&self) -> usize {
        self.tokens_per_query_frame
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    /// Rows belonging to the `i`-th query frame.
    pub fn row_group(&self, i: usize) -> Range<usize> {
        i * self.tokens_per_query_frame..(i + 1) * self.tokens_per_query_frame
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Every query row of an open-gate frame sees exactly the spatial and
/// temporal blocks of its matched reference; closed-gate rows see nothing.
pub fn build_mask(
    decisions: &[GateDecision],
    hybrid: &HybridMemory,
    tokens_per_query_frame: usize,
) -> Result<AttentionMask, MemoryError> {
    if tokens_per_query_frame == 0 {
        return Err(MemoryError::ZeroQueryTokens);
    }
    let cols = hybrid.len();
    let rows = decisions.len() * tokens_per_query_frame;
    let mut bits = vec![false; rows * cols];
    for (i, d) in decisions.iter().enumerate() {
        let Some(r) = d.active_reference() else {
            continue;
        };
        let visible: Vec<Range<usize>> = [BlockKind::Spatial, BlockKind::Temporal]
            .iter()
            .filter_map(|&k| hybrid.block(r, k).map(|b| b.tokens.clone()))
            .collect();
        if visible.is_empty() {
            return Err(MemoryError::UnattributedReference {
                target: d.target,
                reference: r,
            });
        }
        for row in i * tokens_per_query_frame..(i + 1) * tokens_per_query_frame {
            let line = &mut bits[row * cols..(row + 1) * cols];
            for range in &visible {
                line[range.clone()].fill(true);
            }
        }
    }
    Ok(AttentionMask {
        rows,
        cols,
        tokens_per_query_frame,
        bits,
    })
}

/// Closed-form true-entry count of [`build_mask`].
pub fn expected_mask_population(
    decisions: &[GateDecision],
    hybrid: &HybridMemory,
    tokens_per_query_frame: usize,
) -> usize {
    decisions
        .iter()
        .filter_map(|d| d.active_reference())
        .map(|r| {
            let frames: usize = hybrid
                .blocks()
                .iter()
                .filter(|b| b.reference == r)
                .map(|b| b.frames.len())
                .sum();
            tokens_per_query_frame * hybrid.tokens_per_frame() * frames
        })
        .sum()
}
