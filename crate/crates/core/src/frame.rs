//! 8-bit RGB frames and binary PPM (P6) files.

use std::fs;
use std::hash::Hasher;
use std::io;
use std::path::Path;

use fnv::FnvHasher;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("buffer holds {actual} bytes, expected {expected} for {width}x{height} RGB")]
    BufferSize {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("frames differ in size: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Maps a channel value in [0, 1] to a byte, clamping out-of-range input.
pub fn quantize(value: f64) -> u8 {
    (value.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 64-bit FNV-1a digest.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hasher = FnvHasher::default();
    hasher.write(bytes);
    hasher.finish()
}

/// Row-major interleaved RGB, one byte per channel (value / 255 in [0, 1]).
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("checksum", &format_args!("{:016x}", fnv1a64(&self.data)))
            .finish()
    }
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, FrameError> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(FrameError::BufferSize {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Frame {
            width,
            height,
            data,
        }
    }

    /// Quantizes interleaved channel values in [0, 1].
    pub fn from_unit(width: u32, height: u32, values: &[f64]) -> Result<Self, FrameError> {
        Frame::new(width, height, values.iter().map(|&v| quantize(v)).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_size(&self, other: &Frame) -> Result<(), FrameError> {
        if self.width != other.width || self.height != other.height {
            return Err(FrameError::SizeMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Interleaved channel values in [0, 1].
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|&b| b as f64 / 255.0).collect()
    }

    /// Rec. 601 luma in [0, 1], one value per pixel.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
            .collect()
    }

    /// Photographic negative.
    pub fn inverted(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| 255 - b).collect(),
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, FrameError> {
        let mut pos = 0;
        let mut header = [0u32; 3];
        let magic = next_token(bytes, &mut pos).ok_or_else(|| ppm_err("missing magic"))?;
        if magic != b"P6" {
            return Err(ppm_err("not a binary P6 file"));
        }
        for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
            let tok = next_token(bytes, &mut pos).ok_or_else(|| ppm_err(&format!("missing {name}")))?;
            *slot = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ppm_err(&format!("bad {name}")))?;
        }
        if header[2] != 255 {
            return Err(ppm_err("only maxval 255 is supported"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(ppm_err("missing raster"));
        }
        pos += 1;
        Frame::new(header[0], header[1], bytes[pos..].to_vec())
            .map_err(|e| ppm_err(&e.to_string()))
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), FrameError> {
        fs::write(path, self.to_ppm())?;
        Ok(())
    }

    pub fn read_ppm(path: &Path) -> Result<Self, FrameError> {
        Frame::from_ppm(&fs::read(path)?)
    }
}

fn ppm_err(msg: &str) -> FrameError {
    FrameError::Ppm(msg.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}
