use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Clip, ClipFormat, Frame, Plane};
use crate::error::{Error, Result};

pub fn read_sidecar(path: &Path) -> Result<ClipFormat> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let format: ClipFormat = serde_json::from_str(&text)?;
    format.validate()?;
    Ok(format)
}

pub fn write_sidecar(format: &ClipFormat, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a frame-sequential planar YUV file described by `sidecar`.
pub fn read_clip(path: &Path, sidecar: &Path) -> Result<Clip> {
    let format = read_sidecar(sidecar)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (format.bytes_per_frame() * format.frame_count) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::CorruptInput {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len() as u64,
        });
    }

    let wide = format.bytes_per_sample() == 2;
    let mut frames = Vec::with_capacity(format.frame_count);
    for chunk in bytes.chunks_exact(format.bytes_per_frame()) {
        let mut offset = 0;
        let mut planes = Vec::with_capacity(3);
        for p in 0..3 {
            let (w, h) = format.plane_dims(p);
            let n = w * h;
            let data: Vec<u16> = if wide {
                chunk[offset..offset + 2 * n]
                    .chunks_exact(2)
                    .map(|b| u16::from_le_bytes([b[0], b[1]]))
                    .collect()
            } else {
                chunk[offset..offset + n].iter().map(|&b| b as u16).collect()
            };
            offset += n * format.bytes_per_sample();
            planes.push(Plane::new(w, h, data));
        }
        let v = planes.pop().unwrap();
        let u = planes.pop().unwrap();
        let y = planes.pop().unwrap();
        frames.push(Frame::new(y, u, v));
    }
    Clip::new(format, frames)
}

pub fn write_clip(clip: &Clip, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let wide = clip.format.bytes_per_sample() == 2;
    for frame in &clip.frames {
        for plane in &frame.planes {
            if wide {
                for &s in &plane.data {
                    out.write_all(&s.to_le_bytes()).map_err(|e| Error::io(path, e))?;
                }
            } else {
                let row: Vec<u8> = plane.data.iter().map(|&s| s as u8).collect();
                out.write_all(&row).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
