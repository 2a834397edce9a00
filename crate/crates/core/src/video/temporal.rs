use super::{Clip, ClipFormat, Frame, Plane};
use crate::error::{Error, Result};

/// Halves the frame rate by keeping frames 0, 2, 4, ...
pub fn temporal_downsample(clip: &Clip) -> Result<Clip> {
    if clip.frame_count() < 2 {
        return Err(Error::InvalidArgument(
            "temporal downsampling needs at least 2 frames".into(),
        ));
    }
    let format = ClipFormat {
        fps: clip.format.fps / 2.0,
        ..clip.format.clone()
    };
    let frames = clip.frames.iter().step_by(2).cloned().collect();
    Clip::new(format, frames)
}

fn midpoint(a: &Plane, b: &Plane) -> Plane {
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| ((x as u32 + y as u32 + 1) >> 1) as u16)
        .collect();
    Plane::new(a.width, a.height, data)
}

/// Doubles the frame rate by linear-filter interpolation: each original frame
/// is followed by the pixelwise mean of it and its successor. The last frame
/// is repeated so the output has `2N` frames and the same duration.
pub fn temporal_upsample_lfi(clip: &Clip, target_fps: f64) -> Result<Clip> {
    let fps = clip.format.fps;
    if (target_fps - 2.0 * fps).abs() > 1e-9 * fps.max(1.0) {
        return Err(Error::UnsupportedRatio {
            from: fps,
            to: target_fps,
        });
    }
    let n = clip.frame_count();
    let mut frames = Vec::with_capacity(2 * n);
    for (i, frame) in clip.frames.iter().enumerate() {
        frames.push(frame.clone());
        match clip.frames.get(i + 1) {
            Some(next) => {
                let [y, u, v] = std::array::from_fn(|p| midpoint(&frame.planes[p], &next.planes[p]));
                frames.push(Frame::new(y, u, v));
            }
            None => frames.push(frame.clone()),
        }
    }
    let format = ClipFormat {
        fps: target_fps,
        ..clip.format.clone()
    };
    Clip::new(format, frames)
}
