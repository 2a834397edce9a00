//! Raw planar video: formats, frames, file I/O and the signal operators used
//! to build space-time subsampled stimuli.
//!
//! Samples are always held as `u16` regardless of bit depth. 8-bit files are
//! stored one byte per sample; 10-bit files use little-endian 16-bit words
//! with the value in the low 10 bits.

mod conform;
mod io;
mod resample;
mod temporal;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conform::conform_source;
pub use io::{read_clip, read_sidecar, write_clip, write_sidecar};
pub use resample::{lanczos_weights, resize_lanczos, AxisWeights, ResampleSpec};
pub use temporal::{temporal_downsample, temporal_upsample_lfi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChromaFormat {
    #[serde(rename = "yuv420p")]
    Yuv420,
    #[serde(rename = "yuv422p")]
    Yuv422,
}

impl ChromaFormat {
    /// Horizontal and vertical chroma decimation shifts.
    pub fn decimation(self) -> (u32, u32) {
        match self {
            ChromaFormat::Yuv420 => (1, 1),
            ChromaFormat::Yuv422 => (1, 0),
        }
    }
}

/// Sidecar metadata describing a raw clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipFormat {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub bit_depth: u8,
    pub chroma: ChromaFormat,
    pub frame_count: usize,
}

impl ClipFormat {
    pub fn validate(&self) -> Result<()> {
        if self.bit_depth != 8 && self.bit_depth != 10 {
            return Err(Error::Format(format!(
                "bit depth {} (only 8 and 10 are supported)",
                self.bit_depth
            )));
        }
        if self.width == 0 || self.height == 0 || !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return Err(Error::Format(format!(
                "dimensions {}x{} must be non-zero and even",
                self.width, self.height
            )));
        }
        if self.frame_count == 0 {
            return Err(Error::Format("frame_count must be at least 1".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Format(format!("fps {} must be positive", self.fps)));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }

    pub fn duration(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }

    pub fn chroma_dims(&self) -> (usize, usize) {
        let (sx, sy) = self.chroma.decimation();
        (self.width >> sx, self.height >> sy)
    }

    pub fn plane_dims(&self, plane: usize) -> (usize, usize) {
        if plane == 0 {
            (self.width, self.height)
        } else {
            self.chroma_dims()
        }
    }

    pub fn samples_per_frame(&self) -> usize {
        let (cw, ch) = self.chroma_dims();
        self.width * self.height + 2 * cw * ch
    }

    pub fn bytes_per_sample(&self) -> usize {
        if self.bit_depth > 8 {
            2
        } else {
            1
        }
    }

    pub fn bytes_per_frame(&self) -> usize {
        self.samples_per_frame() * self.bytes_per_sample()
    }

    /// Luma samples per second.
    pub fn pixel_rate(&self) -> f64 {
        (self.width * self.height) as f64 * self.fps
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size mismatch");
        Plane {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        Plane::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u16] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

/// One frame: luma followed by the two chroma planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub planes: [Plane; 3],
}

impl Frame {
    pub fn new(y: Plane, u: Plane, v: Plane) -> Self {
        Frame { planes: [y, u, v] }
    }

    /// A frame with every sample in each plane set to the given value.
    pub fn uniform(format: &ClipFormat, luma: u16, cb: u16, cr: u16) -> Self {
        let (cw, ch) = format.chroma_dims();
        Frame::new(
            Plane::filled(format.width, format.height, luma),
            Plane::filled(cw, ch, cb),
            Plane::filled(cw, ch, cr),
        )
    }

    pub fn luma(&self) -> &Plane {
        &self.planes[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub format: ClipFormat,
    pub frames: Vec<Frame>,
}

impl Clip {
    /// Builds a clip, checking plane geometry and sample range against the
    /// format. `format.frame_count` is overwritten with `frames.len()`.
    pub fn new(mut format: ClipFormat, frames: Vec<Frame>) -> Result<Self> {
        format.frame_count = frames.len();
        format.validate()?;
        let max = format.max_code();
        for (t, frame) in frames.iter().enumerate() {
            for (p, plane) in frame.planes.iter().enumerate() {
                let (w, h) = format.plane_dims(p);
                if plane.width != w || plane.height != h || plane.data.len() != w * h {
                    return Err(Error::Format(format!(
                        "frame {t} plane {p} is {}x{}, expected {w}x{h}",
                        plane.width, plane.height
                    )));
                }
                if let Some(&bad) = plane.data.iter().find(|&&s| s > max) {
                    return Err(Error::Format(format!(
                        "frame {t} plane {p} sample {bad} exceeds {max} for {}-bit",
                        format.bit_depth
                    )));
                }
            }
        }
        Ok(Clip { format, frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// Rounds half up and clamps into `[0, max]`.
#[inline]
pub(crate) fn quantize(value: f64, max: u16) -> u16 {
    let v = (value + 0.5).floor();
    if v <= 0.0 {
        0
    } else if v >= max as f64 {
        max
    } else {
        v as u16
    }
}
