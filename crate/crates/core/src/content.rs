//! Low-level content descriptors: spatial information, temporal information,
//! colorfulness, and coverage statistics over a set of source contents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, population_std};
use crate::video::{Clip, Frame, Plane};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContentFeatures {
    pub si: f64,
    pub ti: f64,
    pub cf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub relative_range: f64,
    pub uniformity: f64,
    pub bin_count: usize,
}

/// Luma plane rescaled to the 8-bit code range.
fn normalized_luma(plane: &Plane, bit_depth: u8) -> Vec<f64> {
    let scale = 255.0 / ((1u32 << bit_depth) - 1) as f64;
    plane.data.iter().map(|&s| s as f64 * scale).collect()
}

fn sobel_magnitudes(luma: &[f64], width: usize, height: usize) -> Vec<f64> {
    let at = |x: usize, y: usize| luma[y * width + x];
    let mut out = Vec::with_capacity(width.saturating_sub(2) * height.saturating_sub(2));
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Spatial and temporal information on the luma plane.
///
/// SI is the maximum over frames of the spatial standard deviation of the
/// Sobel gradient magnitude (interior pixels); TI is the maximum over
/// consecutive frame pairs of the standard deviation of the luma difference.
/// Luma is rescaled to 8-bit codes first.
pub fn si_ti(clip: &Clip) -> Result<(f64, f64)> {
    if clip.frame_count() < 2 {
        return Err(Error::Undefined(
            "temporal information needs at least 2 frames".into(),
        ));
    }
    let (w, h, bd) = (clip.format.width, clip.format.height, clip.format.bit_depth);
    let lumas: Vec<Vec<f64>> = clip
        .frames
        .iter()
        .map(|f| normalized_luma(f.luma(), bd))
        .collect();
    let si = lumas
        .iter()
        .map(|l| population_std(&sobel_magnitudes(l, w, h)))
        .fold(0.0, f64::max);
    let ti = lumas
        .windows(2)
        .map(|pair| {
            let diff: Vec<f64> = pair[1].iter().zip(&pair[0]).map(|(a, b)| a - b).collect();
            population_std(&diff)
        })
        .fold(0.0, f64::max);
    Ok((si, ti))
}

// BT.709 luma coefficients.
const KR: f64 = 0.2126;
const KB: f64 = 0.0722;

/// Limited-range BT.709 YCbCr to RGB on the 8-bit scale, clamped to [0, 255].
pub(crate) fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64, bit_depth: u8) -> [f64; 3] {
    let s = (1u32 << (bit_depth - 8)) as f64;
    let kg = 1.0 - KR - KB;
    let yn = (y - 16.0 * s) / (219.0 * s);
    let pb = (cb - 128.0 * s) / (224.0 * s);
    let pr = (cr - 128.0 * s) / (224.0 * s);
    let r = yn + 2.0 * (1.0 - KR) * pr;
    let g = yn - 2.0 * KB * (1.0 - KB) / kg * pb - 2.0 * KR * (1.0 - KR) / kg * pr;
    let b = yn + 2.0 * (1.0 - KB) * pb;
    [r, g, b].map(|c| (c * 255.0).clamp(0.0, 255.0))
}

fn frame_colorfulness(frame: &Frame, bit_depth: u8, sx: u32, sy: u32) -> f64 {
    let (w, h) = (frame.planes[0].width, frame.planes[0].height);
    let mut rg = Vec::with_capacity(w * h);
    let mut yb = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [r, g, b] = ycbcr_to_rgb(
                frame.planes[0].get(x, y) as f64,
                frame.planes[1].get(x >> sx, y >> sy) as f64,
                frame.planes[2].get(x >> sx, y >> sy) as f64,
                bit_depth,
            );
            rg.push(r - g);
            yb.push(0.5 * (r + g) - b);
        }
    }
    let (s_rg, s_yb) = (population_std(&rg), population_std(&yb));
    let (m_rg, m_yb) = (mean(&rg), mean(&yb));
    (s_rg * s_rg + s_yb * s_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

/// Hasler–Süsstrunk colorfulness, averaged over frames.
pub fn colorfulness(clip: &Clip) -> f64 {
    let (sx, sy) = clip.format.chroma.decimation();
    let per_frame: Vec<f64> = clip
        .frames
        .iter()
        .map(|f| frame_colorfulness(f, clip.format.bit_depth, sx, sy))
        .collect();
    mean(&per_frame)
}

pub fn content_features(clip: &Clip) -> Result<ContentFeatures> {
    let (si, ti) = si_ti(clip)?;
    Ok(ContentFeatures {
        si,
        ti,
        cf: colorfulness(clip),
    })
}

/// Relative range and uniformity of coverage of one feature over a set of
/// contents. Uniformity is the entropy of the histogram over `bins`
/// equal-width bins spanning the attainable range, normalized by `log2(bins)`.
pub fn coverage_stats(
    values: &[f64],
    attainable_min: f64,
    attainable_max: f64,
    bins: usize,
) -> Result<CoverageReport> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("coverage needs at least one value".into()));
    }
    if !(attainable_max > attainable_min) {
        return Err(Error::InvalidArgument(format!(
            "attainable range [{attainable_min}, {attainable_max}] is empty"
        )));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument("coverage needs at least 2 bins".into()));
    }
    if let Some(&v) = values
        .iter()
        .find(|&&v| !(v >= attainable_min && v <= attainable_max))
    {
        return Err(Error::Domain {
            value: v,
            min: attainable_min,
            max: attainable_max,
        });
    }
    let span = attainable_max - attainable_min;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - attainable_min) / span) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    let entropy: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    Ok(CoverageReport {
        relative_range: (hi - lo) / span,
        uniformity: entropy / (bins as f64).log2(),
        bin_count: bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{ChromaFormat, ClipFormat};

    fn format(w: usize, h: usize, n: usize, bd: u8) -> ClipFormat {
        ClipFormat {
            width: w,
            height: h,
            fps: 30.0,
            bit_depth: bd,
            chroma: ChromaFormat::Yuv420,
            frame_count: n,
        }
    }

    #[test]
    fn static_and_flat_clips_have_zero_features() {
        let f = format(16, 16, 3, 8);
        let frame = Frame::uniform(&f, 90, 128, 128);
        let clip = Clip::new(f, vec![frame; 3]).unwrap();
        let (si, ti) = si_ti(&clip).unwrap();
        assert_eq!(si, 0.0);
        assert_eq!(ti, 0.0);
        assert_eq!(colorfulness(&clip), 0.0);
    }

    #[test]
    fn single_frame_ti_is_undefined() {
        let f = format(16, 16, 1, 8);
        let clip = Clip::new(f.clone(), vec![Frame::uniform(&f, 1, 128, 128)]).unwrap();
        assert!(matches!(si_ti(&clip), Err(Error::Undefined(_))));
    }

    #[test]
    fn si_ti_ignore_luma_offset() {
        let f = format(16, 16, 2, 8);
        let make = |off: u16| {
            let frames = (0..2)
                .map(|t| {
                    let luma = (0..256).map(|i| off + ((i * 7 + t * 13) % 50) as u16).collect();
                    Frame::new(
                        Plane::new(16, 16, luma),
                        Plane::filled(8, 8, 128),
                        Plane::filled(8, 8, 128),
                    )
                })
                .collect();
            Clip::new(f.clone(), frames).unwrap()
        };
        let (a, b) = (si_ti(&make(20)).unwrap(), si_ti(&make(140)).unwrap());
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }

    #[test]
    fn cf_mean_pools_frames() {
        let f = format(16, 16, 2, 8);
        let a = Frame::uniform(&f, 100, 110, 200);
        let b = Frame::uniform(&f, 120, 150, 100);
        let single = |fr: &Frame| {
            colorfulness(&Clip::new(format(16, 16, 1, 8), vec![fr.clone()]).unwrap())
        };
        let both = colorfulness(&Clip::new(f, vec![a.clone(), b.clone()]).unwrap());
        assert!((both - 0.5 * (single(&a) + single(&b))).abs() < 1e-12);
    }

    #[test]
    fn coverage_identical_values() {
        let r = coverage_stats(&[3.0; 5], 0.0, 10.0, 10).unwrap();
        assert_eq!(r.relative_range, 0.0);
        assert_eq!(r.uniformity, 0.0);
    }

    #[test]
    fn coverage_bin_centers_are_uniform() {
        let values: Vec<f64> = (0..10).flat_map(|b| [b as f64 + 0.5; 3]).collect();
        let r = coverage_stats(&values, 0.0, 10.0, 10).unwrap();
        assert!((r.uniformity - 1.0).abs() < 1e-12);
        assert!((r.relative_range - 0.9).abs() < 1e-12);
    }

    #[test]
    fn coverage_rejects_out_of_domain() {
        assert!(matches!(
            coverage_stats(&[1.0, 11.0], 0.0, 10.0, 10),
            Err(Error::Domain { .. })
        ));
        assert!(coverage_stats(&[1.0], 0.0, 10.0, 1).is_err());
    }
}
