//! Image metrics and the revisit-consistency protocol: pair every return
//! frame with its earliest matching first-pass frame and score the
//! generated pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::Frame;
use crate::simworld::EpisodeRecord;
use crate::trajectory::{poses_match, Trajectory};

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 99.0;
/// Default pose tolerance for declaring a revisit.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("inputs differ in size ({0} vs {1} values)")]
    SizeMismatch(usize, usize),
    #[error("image is {width}x{height}, smaller than the {window}x{window} window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("pair ({0}, {1}) is out of range for {2} frames")]
    IndexOutOfRange(usize, usize, usize),
    #[error("invalid metric parameters: {0}")]
    InvalidParams(&'static str),
}

/// PSNR in dB between two equally sized value arrays.
pub fn psnr_values(a: &[f64], b: &[f64], peak: f64) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::InvalidParams("empty input"));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / mse).log10()).clamp(0.0, PSNR_CAP))
}

/// PSNR over all channels, values scaled to [0, 1].
pub fn psnr(a: &Frame, b: &Frame, peak: f64) -> Result<f64, MetricsError> {
    if a.same_size(b).is_err() {
        return Err(MetricsError::SizeMismatch(a.as_bytes().len(), b.as_bytes().len()));
    }
    psnr_values(&a.to_unit(), &b.to_unit(), peak)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the input values.
    pub range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            range: 1.0,
        }
    }
}

fn gaussian_kernel(window: usize, sigma: f64) -> Vec<f64> {
    let mid = (window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..window)
        .map(|i| (-(i as f64 - mid).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable Gaussian filter keeping only fully covered window positions.
fn filter_valid(img: &[f64], width: usize, height: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (width - n + 1, height - n + 1);
    let mut horizontal = vec![0.0; ow * height];
    for y in 0..height {
        let row = &img[y * width..(y + 1) * width];
        for x in 0..ow {
            horizontal[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|j| k[j] * horizontal[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two single-channel images of `width`×`height`.
pub fn ssim_values(
    a: &[f64],
    b: &[f64],
    width: usize,
    height: usize,
    params: &SsimParams,
) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::SizeMismatch(a.len(), b.len()));
    }
    if a.len() != width * height {
        return Err(MetricsError::SizeMismatch(a.len(), width * height));
    }
    if params.window == 0 || params.sigma.is_nan() || params.sigma <= 0.0 || params.range.is_nan() || params.range <= 0.0 {
        return Err(MetricsError::InvalidParams("window, sigma and range must be positive"));
    }
    if width < params.window || height < params.window {
        return Err(MetricsError::TooSmall {
            width,
            height,
            window: params.window,
        });
    }
    let k = gaussian_kernel(params.window, params.sigma);
    let c1 = (params.k1 * params.range).powi(2);
    let c2 = (params.k2 * params.range).powi(2);
    let products = |f: fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(a, width, height, &k);
    let mu_b = filter_valid(b, width, height, &k);
    let aa = filter_valid(&products(|x, _| x * x), width, height, &k);
    let bb = filter_valid(&products(|_, y| y * y), width, height, &k);
    let ab = filter_valid(&products(|x, y| x * y), width, height, &k);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// SSIM on Rec. 601 luma.
pub fn ssim(a: &Frame, b: &Frame, params: &SsimParams) -> Result<f64, MetricsError> {
    if a.same_size(b).is_err() {
        return Err(MetricsError::SizeMismatch(a.as_bytes().len(), b.as_bytes().len()));
    }
    ssim_values(&a.luma(), &b.luma(), a.width() as usize, a.height() as usize, params)
}

/// `(return frame, first-pass frame)` pairs with matching poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisitPairing {
    pub pairs: Vec<(usize, usize)>,
    pub tolerance: f64,
}

/// Pairs each frame with the earliest earlier frame whose rotation angle
/// and center distance are both within `tolerance`.
pub fn pair_revisits(traj: &Trajectory, tolerance: f64) -> RevisitPairing {
    let poses = traj.poses();
    let pairs = (1..poses.len())
        .into_par_iter()
        .filter_map(|t| {
            (0..t)
                .find(|&u| poses_match(&poses[t], &poses[u], tolerance))
                .map(|u| (t, u))
        })
        .collect();
    RevisitPairing { pairs, tolerance }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub return_frame: usize,
    pub first_frame: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_psnr: f64,
    pub min_psnr: f64,
    pub mean_ssim: f64,
    pub min_ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub label: String,
    pub seed: u64,
    pub memory: bool,
    pub tolerance: f64,
    pub pairs: Vec<PairScore>,
    /// Absent when there are no pairs.
    pub aggregates: Option<Aggregates>,
}

impl ConsistencyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "episode {} (seed {}, memory {})\n{:>8} {:>8} {:>9} {:>8}\n",
            self.label,
            self.seed,
            if self.memory { "on" } else { "off" },
            "return",
            "first",
            "psnr_db",
            "ssim"
        );
        for p in &self.pairs {
            out.push_str(&format!(
                "{:>8} {:>8} {:>9.3} {:>8.4}\n",
                p.return_frame, p.first_frame, p.psnr, p.ssim
            ));
        }
        match &self.aggregates {
            Some(a) => out.push_str(&format!(
                "mean psnr {:.3} dB, min psnr {:.3} dB, mean ssim {:.4}, min ssim {:.4}\n",
                a.mean_psnr, a.min_psnr, a.mean_ssim, a.min_ssim
            )),
            None => out.push_str("no revisit pairs: aggregates undefined\n"),
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("return_frame,first_frame,psnr_db,ssim\n");
        for p in &self.pairs {
            out.push_str(&format!("{},{},{},{}\n", p.return_frame, p.first_frame, p.psnr, p.ssim));
        }
        out
    }
}

/// Scores generated return frames against their first-pass counterparts.
pub fn evaluate(
    episode: &EpisodeRecord,
    pairing: &RevisitPairing,
    label: &str,
) -> Result<ConsistencyReport, MetricsError> {
    let n = episode.frames.len();
    if let Some(&(t, u)) = pairing.pairs.iter().find(|&&(t, u)| t >= n || u >= n) {
        return Err(MetricsError::IndexOutOfRange(t, u, n));
    }
    let params = SsimParams::default();
    let pairs = pairing
        .pairs
        .par_iter()
        .map(|&(t, u)| {
            let (a, b) = (&episode.frames[t].generated, &episode.frames[u].generated);
            Ok(PairScore {
                return_frame: t,
                first_frame: u,
                psnr: psnr(a, b, 1.0)?,
                ssim: ssim(a, b, &params)?,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let aggregates = (!pairs.is_empty()).then(|| {
        let k = pairs.len() as f64;
        Aggregates {
            mean_psnr: pairs.iter().map(|p| p.psnr).sum::<f64>() / k,
            min_psnr: pairs.iter().map(|p| p.psnr).fold(f64::INFINITY, f64::min),
            mean_ssim: pairs.iter().map(|p| p.ssim).sum::<f64>() / k,
            min_ssim: pairs.iter().map(|p| p.ssim).fold(f64::INFINITY, f64::min),
        }
    });
    Ok(ConsistencyReport {
        label: label.to_string(),
        seed: episode.config.seed,
        memory: episode.config.memory,
        tolerance: pairing.tolerance,
        pairs,
        aggregates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub return_frame: usize,
    pub first_frame: usize,
    pub psnr_a: f64,
    pub psnr_b: f64,
    pub ssim_a: f64,
    pub ssim_b: f64,
}

impl ComparisonRow {
    pub fn psnr_delta(&self) -> f64 {
        self.psnr_a - self.psnr_b
    }

    pub fn ssim_delta(&self) -> f64 {
        self.ssim_a - self.ssim_b
    }
}

/// Paired per-revisit comparison of two reports over the same pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(a: &ConsistencyReport, b: &ConsistencyReport) -> Result<Comparison, MetricsError> {
    if a.pairs.len() != b.pairs.len() {
        return Err(MetricsError::SizeMismatch(a.pairs.len(), b.pairs.len()));
    }
    let rows = a
        .pairs
        .iter()
        .zip(&b.pairs)
        .map(|(x, y)| {
            if (x.return_frame, x.first_frame) != (y.return_frame, y.first_frame) {
                return Err(MetricsError::IndexOutOfRange(y.return_frame, y.first_frame, 0));
            }
            Ok(ComparisonRow {
                return_frame: x.return_frame,
                first_frame: x.first_frame,
                psnr_a: x.psnr,
                psnr_b: y.psnr,
                ssim_a: x.ssim,
                ssim_b: y.ssim,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Comparison {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        rows,
    })
}

impl Comparison {
    pub fn mean_psnr_delta(&self) -> Option<f64> {
        (!self.rows.is_empty())
            .then(|| self.rows.iter().map(ComparisonRow::psnr_delta).sum::<f64>() / self.rows.len() as f64)
    }

    pub fn mean_ssim_delta(&self) -> Option<f64> {
        (!self.rows.is_empty())
            .then(|| self.rows.iter().map(ComparisonRow::ssim_delta).sum::<f64>() / self.rows.len() as f64)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("a = {}\nb = {}\n", self.label_a, self.label_b);
        out.push_str(&format!(
            "{:>8} {:>8} {:>9} {:>9} {:>9} {:>8} {:>8} {:>8}\n",
            "return", "first", "psnr_a", "psnr_b", "d_psnr", "ssim_a", "ssim_b", "d_ssim"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:>8} {:>8} {:>9.3} {:>9.3} {:>+9.3} {:>8.4} {:>8.4} {:>+8.4}\n",
                r.return_frame,
                r.first_frame,
                r.psnr_a,
                r.psnr_b,
                r.psnr_delta(),
                r.ssim_a,
                r.ssim_b,
                r.ssim_delta()
            ));
        }
        match (self.mean_psnr_delta(), self.mean_ssim_delta()) {
            (Some(p), Some(s)) => out.push_str(&format!("mean delta: psnr {p:+.3} dB, ssim {s:+.4}\n")),
            _ => out.push_str("no revisit pairs\n"),
        }
        out
    }
}
