use std::f64::consts::PI;

use rayon::prelude::*;

use super::{quantize, Clip, ClipFormat, Frame, Plane};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleSpec {
    pub target_width: usize,
    pub target_height: usize,
    /// Lanczos lobe count `a`.
    pub kernel_taps: usize,
}

impl ResampleSpec {
    pub fn new(target_width: usize, target_height: usize) -> Self {
        ResampleSpec {
            target_width,
            target_height,
            kernel_taps: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.target_width < 16 || self.target_height < 16 {
            return Err(Error::InvalidArgument(format!(
                "resample target {}x{} is below the 16-pixel minimum",
                self.target_width, self.target_height
            )));
        }
        if !self.target_width.is_multiple_of(2) || !self.target_height.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "resample target {}x{} must have even dimensions",
                self.target_width, self.target_height
            )));
        }
        if self.kernel_taps < 2 {
            return Err(Error::InvalidArgument("lanczos kernel needs a >= 2".into()));
        }
        Ok(())
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

fn lanczos(x: f64, a: f64) -> f64 {
    if x.abs() >= a {
        0.0
    } else {
        sinc(x) * sinc(x / a)
    }
}

/// Normalized one-dimensional filter taps: for each destination index, the
/// (clamped source index, weight) pairs.
#[derive(Debug, Clone)]
pub struct AxisWeights {
    pub taps: Vec<Vec<(usize, f32)>>,
}

/// Builds the tap table mapping `src_len` samples onto `dst_len` samples.
///
/// Output sample `i` is centered at source coordinate
/// `(i + 0.5) * src_len / dst_len - 0.5`. When downscaling, the kernel is
/// stretched by the scale factor so it also acts as the anti-alias filter.
/// Source indices outside the plane are clamped to the edge.
pub fn lanczos_weights(src_len: usize, dst_len: usize, a: usize) -> AxisWeights {
    let ratio = src_len as f64 / dst_len as f64;
    let stretch = ratio.max(1.0);
    let a = a as f64;
    let support = a * stretch;
    let taps = (0..dst_len)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            let first = (center - support).floor() as i64 + 1;
            let last = (center + support).ceil() as i64 - 1;
            let mut entries: Vec<(usize, f64)> = (first..=last)
                .map(|j| {
                    let w = lanczos((j as f64 - center) / stretch, a);
                    (j.clamp(0, src_len as i64 - 1) as usize, w)
                })
                .filter(|&(_, w)| w != 0.0)
                .collect();
            let sum: f64 = entries.iter().map(|e| e.1).sum();
            for e in &mut entries {
                e.1 /= sum;
            }
            entries.into_iter().map(|(j, w)| (j, w as f32)).collect()
        })
        .collect();
    AxisWeights { taps }
}

fn resize_plane(plane: &Plane, dst_w: usize, dst_h: usize, a: usize, max: u16) -> Plane {
    if plane.width == dst_w && plane.height == dst_h {
        return plane.clone();
    }
    let hx = lanczos_weights(plane.width, dst_w, a);
    let hy = lanczos_weights(plane.height, dst_h, a);

    let mut tmp = vec![0f32; dst_w * plane.height];
    for y in 0..plane.height {
        let src = plane.row(y);
        let out = &mut tmp[y * dst_w..(y + 1) * dst_w];
        for (o, taps) in out.iter_mut().zip(&hx.taps) {
            *o = taps.iter().map(|&(j, w)| src[j] as f32 * w).sum();
        }
    }

    let mut data = vec![0u16; dst_w * dst_h];
    let mut acc = vec![0f32; dst_w];
    for (y, taps) in hy.taps.iter().enumerate() {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for &(j, w) in taps {
            let row = &tmp[j * dst_w..(j + 1) * dst_w];
            for (a, &r) in acc.iter_mut().zip(row) {
                *a += r * w;
            }
        }
        for (d, &v) in data[y * dst_w..(y + 1) * dst_w].iter_mut().zip(&acc) {
            *d = quantize(v as f64, max);
        }
    }
    Plane::new(dst_w, dst_h, data)
}

/// Separable Lanczos resampling of every plane of every frame. Chroma planes
/// are scaled by the same ratio as luma.
pub fn resize_lanczos(clip: &Clip, spec: &ResampleSpec) -> Result<Clip> {
    spec.validate()?;
    let format = ClipFormat {
        width: spec.target_width,
        height: spec.target_height,
        ..clip.format.clone()
    };
    format.validate()?;
    let max = format.max_code();
    let a = spec.kernel_taps;
    let frames = clip
        .frames
        .par_iter()
        .map(|frame| {
            let planes: Vec<Plane> = frame
                .planes
                .iter()
                .enumerate()
                .map(|(p, plane)| {
                    let (w, h) = format.plane_dims(p);
                    resize_plane(plane, w, h, a, max)
                })
                .collect();
            let [y, u, v]: [Plane; 3] = planes.try_into().expect("three planes");
            Frame::new(y, u, v)
        })
        .collect();
    Clip::new(format, frames)
}
