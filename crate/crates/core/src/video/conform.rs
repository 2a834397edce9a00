use super::{ChromaFormat, Clip, ClipFormat, Frame, Plane};
use crate::error::{Error, Result};

/// Center-crops a source clip to `width`x`height` and converts 4:2:2 chroma to
/// 4:2:0 by averaging vertically adjacent chroma rows. Bit depth, frame rate
/// and frame count are untouched. No upscaling is performed.
pub fn conform_source(clip: &Clip, width: usize, height: usize) -> Result<Clip> {
    let src = &clip.format;
    if width > src.width || height > src.height {
        return Err(Error::InvalidArgument(format!(
            "conform target {width}x{height} exceeds source {}x{}",
            src.width, src.height
        )));
    }
    let target = ClipFormat {
        width,
        height,
        chroma: ChromaFormat::Yuv420,
        ..src.clone()
    };
    target.validate()?;
    if width == src.width && height == src.height && src.chroma == ChromaFormat::Yuv420 {
        return Ok(clip.clone());
    }

    // Offsets are kept even so chroma stays co-sited with luma.
    let left = ((src.width - width) / 2) & !1;
    let top = ((src.height - height) / 2) & !1;
    let (_, sy) = src.chroma.decimation();

    let frames = clip
        .frames
        .iter()
        .map(|frame| {
            let y = crop(&frame.planes[0], left, top, width, height);
            let chroma = |p: &Plane| {
                let cropped = crop(p, left / 2, top >> sy, width / 2, height >> sy);
                if sy == 0 {
                    halve_rows(&cropped)
                } else {
                    cropped
                }
            };
            Frame::new(y, chroma(&frame.planes[1]), chroma(&frame.planes[2]))
        })
        .collect();
    Clip::new(target, frames)
}

fn crop(plane: &Plane, left: usize, top: usize, width: usize, height: usize) -> Plane {
    let mut data = Vec::with_capacity(width * height);
    for y in top..top + height {
        data.extend_from_slice(&plane.row(y)[left..left + width]);
    }
    Plane::new(width, height, data)
}

fn halve_rows(plane: &Plane) -> Plane {
    let h = plane.height / 2;
    let mut data = Vec::with_capacity(plane.width * h);
    for y in 0..h {
        let (a, b) = (plane.row(2 * y), plane.row(2 * y + 1));
        data.extend(a.iter().zip(b).map(|(&a, &b)| ((a as u32 + b as u32 + 1) >> 1) as u16));
    }
    Plane::new(plane.width, h, data)
}
