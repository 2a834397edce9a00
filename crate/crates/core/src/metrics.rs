//! Full-reference frame metrics on luma (PSNR, SSIM, MS-SSIM), mean-pooled
//! over frames, and ingestion of externally computed model scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::video::{Clip, Plane};

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
/// Smallest short side that leaves an 11-pixel image at the coarsest scale.
pub const MS_SSIM_MIN_SIDE: usize = SSIM_WINDOW << (MS_SSIM_WEIGHTS.len() - 1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Psnr,
    Ssim,
    #[serde(rename = "msssim")]
    MsSsim,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Psnr, Metric::Ssim, Metric::MsSsim];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Psnr => "psnr",
            Metric::Ssim => "ssim",
            Metric::MsSsim => "msssim",
        }
    }

    /// Per-frame luma values.
    pub fn frames(self, reference: &Clip, distorted: &Clip) -> Result<Vec<f64>> {
        check_formats(reference, distorted)?;
        let bd = reference.format.bit_depth;
        let per_frame = |r: &Plane, d: &Plane| -> Result<f64> {
            match self {
                Metric::Psnr => Ok(psnr_plane(r, d, bd)),
                Metric::Ssim => ssim_plane(r, d, bd),
                Metric::MsSsim => ms_ssim_plane(r, d, bd),
            }
        };
        reference
            .frames
            .par_iter()
            .zip(distorted.frames.par_iter())
            .map(|(r, d)| per_frame(r.luma(), d.luma()))
            .collect()
    }

    pub fn score(self, stimulus_id: &str, reference: &Clip, distorted: &Clip) -> Result<MetricScore> {
        Ok(MetricScore::new(stimulus_id, self.name(), self.frames(reference, distorted)?))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psnr" => Ok(Metric::Psnr),
            "ssim" => Ok(Metric::Ssim),
            "msssim" | "ms-ssim" | "ms_ssim" => Ok(Metric::MsSsim),
            other => Err(Error::InvalidArgument(format!("unknown metric {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub stimulus_id: String,
    pub metric: String,
    pub per_frame: Vec<f64>,
    pub pooled: f64,
}

impl MetricScore {
    pub fn new(stimulus_id: &str, metric: &str, per_frame: Vec<f64>) -> Self {
        let pooled = per_frame.iter().sum::<f64>() / per_frame.len().max(1) as f64;
        MetricScore {
            stimulus_id: stimulus_id.to_string(),
            metric: metric.to_string(),
            per_frame,
            pooled,
        }
    }
}

fn check_formats(a: &Clip, b: &Clip) -> Result<()> {
    if a.format != b.format {
        return Err(Error::Format(format!(
            "reference {}x{}@{} {}-bit ({} frames) vs distorted {}x{}@{} {}-bit ({} frames)",
            a.format.width,
            a.format.height,
            a.format.fps,
            a.format.bit_depth,
            a.format.frame_count,
            b.format.width,
            b.format.height,
            b.format.fps,
            b.format.bit_depth,
            b.format.frame_count
        )));
    }
    Ok(())
}

fn peak(bit_depth: u8) -> f64 {
    ((1u32 << bit_depth) - 1) as f64
}

pub fn psnr_plane(reference: &Plane, distorted: &Plane, bit_depth: u8) -> f64 {
    let sse: f64 = reference
        .data
        .iter()
        .zip(&distorted.data)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum();
    let mse = sse / reference.data.len() as f64;
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (peak(bit_depth).powi(2) / mse).log10()).min(PSNR_CAP_DB)
}

/// Float image used by the SSIM family.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn from_plane(p: &Plane) -> Self {
        Image {
            width: p.width,
            height: p.height,
            data: p.data.iter().map(|&v| v as f64).collect(),
        }
    }

    /// 2x2 box average followed by decimation (odd trailing row/column
    /// dropped).
    pub fn downsample(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                data.push(
                    (self.data[i] + self.data[i + 1] + self.data[i + self.width] + self.data[i + self.width + 1])
                        / 4.0,
                );
            }
        }
        Image {
            width: w,
            height: h,
            data,
        }
    }
}

pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable 'valid' filtering with the SSIM window.
fn filter_valid(img: &[f64], width: usize, height: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * height];
    for y in 0..height {
        let row = &img[y * width..(y + 1) * width];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k
                .iter()
                .enumerate()
                .map(|(t, w)| w * tmp[(y + t) * ow + x])
                .sum();
        }
    }
    out
}

/// Returns (mean SSIM, mean luminance term, mean contrast-structure term).
fn ssim_maps(a: &Image, b: &Image, bit_depth: u8) -> (f64, f64, f64) {
    let k = gaussian_window();
    let (w, h) = (a.width, a.height);
    let c1 = (SSIM_K1 * peak(bit_depth)).powi(2);
    let c2 = (SSIM_K2 * peak(bit_depth)).powi(2);
    let sq = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    let mu_a = filter_valid(&a.data, w, h, &k);
    let mu_b = filter_valid(&b.data, w, h, &k);
    let aa = filter_valid(&sq(&a.data), w, h, &k);
    let bb = filter_valid(&sq(&b.data), w, h, &k);
    let ab: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    let ab = filter_valid(&ab, w, h, &k);
    let n = mu_a.len() as f64;
    let (mut ssim, mut lum, mut cs) = (0.0, 0.0, 0.0);
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        let c = (2.0 * cov + c2) / (va + vb + c2);
        lum += l;
        cs += c;
        ssim += l * c;
    }
    (ssim / n, lum / n, cs / n)
}

pub fn ssim_image(a: &Image, b: &Image, bit_depth: u8) -> Result<f64> {
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "{}x{} frame is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window",
            a.width, a.height
        )));
    }
    Ok(ssim_maps(a, b, bit_depth).0)
}

pub fn ssim_plane(reference: &Plane, distorted: &Plane, bit_depth: u8) -> Result<f64> {
    ssim_image(&Image::from_plane(reference), &Image::from_plane(distorted), bit_depth)
}

pub fn ms_ssim_plane(reference: &Plane, distorted: &Plane, bit_depth: u8) -> Result<f64> {
    let short = reference.width.min(reference.height);
    if short < MS_SSIM_MIN_SIDE {
        return Err(Error::InvalidArgument(format!(
            "MS-SSIM needs a short side of at least {MS_SSIM_MIN_SIDE} pixels for 5 scales, got {short}; fewer scales are not supported"
        )));
    }
    let mut a = Image::from_plane(reference);
    let mut b = Image::from_plane(distorted);
    let mut value = 1.0;
    let last = MS_SSIM_WEIGHTS.len() - 1;
    for (scale, &w) in MS_SSIM_WEIGHTS.iter().enumerate() {
        let (_, l, cs) = ssim_maps(&a, &b, bit_depth);
        value *= cs.max(0.0).powf(w);
        if scale == last {
            value *= l.max(0.0).powf(w);
        } else {
            a = a.downsample();
            b = b.downsample();
        }
    }
    Ok(value)
}

/// An externally computed model score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub stimulus_id: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub scores: Vec<ExternalScore>,
    /// distorted stimuli without a score, per metric
    pub warnings: Vec<String>,
}

impl Ingested {
    /// Scores of one metric keyed by stimulus id.
    pub fn metric(&self, name: &str) -> BTreeMap<&str, f64> {
        self.scores
            .iter()
            .filter(|s| s.metric == name)
            .map(|s| (s.stimulus_id.as_str(), s.value))
            .collect()
    }
}

/// Reads `stimulus_id, metric, value` rows and checks them against the
/// manifest.
pub fn ingest_external_scores<R: Read>(input: R, manifest: &Manifest) -> Result<Ingested> {
    let index = manifest.index();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut scores = Vec::new();
    for (i, row) in rdr.deserialize::<ExternalScore>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if !index.contains_key(row.stimulus_id.as_str()) {
            return Err(Error::UnknownStimulus {
                id: row.stimulus_id,
                line,
            });
        }
        if !row.value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite value {}", row.value),
            });
        }
        scores.push(row);
    }
    let metrics: BTreeSet<&str> = scores.iter().map(|s| s.metric.as_str()).collect();
    let mut warnings = Vec::new();
    for m in metrics {
        let have: BTreeSet<&str> = scores
            .iter()
            .filter(|s| s.metric == m)
            .map(|s| s.stimulus_id.as_str())
            .collect();
        for e in manifest.distorted() {
            if !have.contains(e.stimulus_id.as_str()) {
                warnings.push(format!("{m}: no score for {}", e.stimulus_id));
            }
        }
    }
    Ok(Ingested { scores, warnings })
}

/// Writes pooled scores in the external-score schema.
pub fn write_scores<W: Write>(scores: &[MetricScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scores {
        w.serialize(ExternalScore {
            stimulus_id: s.stimulus_id.clone(),
            metric: s.metric.clone(),
            value: s.pooled,
        })?;
    }
    w.flush().map_err(|e| Error::io("<scores>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{ChromaFormat, ClipFormat, Frame};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn flat_clip(w: usize, h: usize, v: u16, n: usize) -> Clip {
        let f = ClipFormat {
            width: w,
            height: h,
            fps: 30.0,
            bit_depth: 8,
            chroma: ChromaFormat::Yuv420,
            frame_count: n,
        };
        Clip::new(f.clone(), vec![Frame::uniform(&f, v, 128, 128); n]).unwrap()
    }

    fn textured(w: usize, h: usize) -> Plane {
        Plane::new(
            w,
            h,
            (0..w * h)
                .map(|i| (128.0 + 60.0 * ((i % w) as f64 * 0.3).sin() * ((i / w) as f64 * 0.2).cos()) as u16)
                .collect(),
        )
    }

    fn noisy(p: &Plane, sigma: f64, seed: u64) -> Plane {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        Plane::new(
            p.width,
            p.height,
            p.data
                .iter()
                .map(|&v| (v as f64 + n.sample(&mut rng)).round().clamp(0.0, 255.0) as u16)
                .collect(),
        )
    }

    #[test]
    fn perfect_values() {
        let p = textured(192, 192);
        assert_eq!(psnr_plane(&p, &p, 8), 100.0);
        assert_eq!(ssim_plane(&p, &p, 8).unwrap(), 1.0);
        assert_eq!(ms_ssim_plane(&p, &p, 8).unwrap(), 1.0);
    }

    #[test]
    fn psnr_zero_db_at_peak_error() {
        let a = Plane::filled(16, 16, 0);
        let b = Plane::filled(16, 16, 255);
        assert_eq!(psnr_plane(&a, &b, 8), 0.0);
    }

    #[test]
    fn ssim_on_constants_is_luminance_only() {
        let (c, d) = (100.0f64, 20.0f64);
        let a = Plane::filled(32, 32, c as u16);
        let b = Plane::filled(32, 32, (c + d) as u16);
        let c1 = (0.01f64 * 255.0).powi(2);
        let want = (2.0 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1);
        assert!((ssim_plane(&a, &b, 8).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn decreasing_with_noise() {
        let p = textured(192, 192);
        let mut last = [f64::INFINITY; 3];
        for sigma in [1.0, 2.0, 4.0, 8.0] {
            let q = noisy(&p, sigma, 1);
            let now = [
                psnr_plane(&p, &q, 8),
                ssim_plane(&p, &q, 8).unwrap(),
                ms_ssim_plane(&p, &q, 8).unwrap(),
            ];
            for k in 0..3 {
                assert!(now[k] < last[k], "metric {k} sigma {sigma}");
            }
            last = now;
        }
    }

    #[test]
    fn small_frames_rejected() {
        let p = Plane::filled(10, 10, 1);
        assert!(ssim_plane(&p, &p, 8).is_err());
        let p = textured(175, 300);
        assert!(ms_ssim_plane(&p, &p, 8).is_err());
    }

    #[test]
    fn pooled_is_mean_and_mismatch_errors() {
        let a = flat_clip(32, 32, 100, 3);
        let b = flat_clip(32, 32, 110, 3);
        let s = Metric::Psnr.score("x", &a, &b).unwrap();
        assert_eq!(s.per_frame.len(), 3);
        assert!((s.pooled - s.per_frame[0]).abs() < 1e-12);
        assert!(Metric::Psnr.frames(&a, &flat_clip(32, 32, 100, 2)).is_err());
    }

    fn manifest() -> Manifest {
        use crate::ladder::{SpatialLevel, TemporalLevel};
        use crate::manifest::ManifestEntry;
        let e = |id: &str, r: bool| ManifestEntry {
            stimulus_id: id.into(),
            content: "A".into(),
            spatial: SpatialLevel::P1080,
            temporal: TemporalLevel::Full,
            qp: Some(30),
            target_level: Some(1),
            achieved_bitrate: Some(1e6),
            is_reference: r,
            media_path: String::new(),
            stages: None,
        };
        Manifest::new(vec![e("r", true), e("a", false), e("b", false)]).unwrap()
    }

    #[test]
    fn ingest_validates_ids() {
        let m = manifest();
        let ok = ingest_external_scores("stimulus_id,metric,value\na,vmaf,80.5\n".as_bytes(), &m).unwrap();
        assert_eq!(ok.scores.len(), 1);
        assert_eq!(ok.warnings, vec!["vmaf: no score for b".to_string()]);
        let empty = ingest_external_scores("stimulus_id,metric,value\n".as_bytes(), &m).unwrap();
        assert!(empty.scores.is_empty() && empty.warnings.is_empty());
        let bad = ingest_external_scores("stimulus_id,metric,value\na,vmaf,1\nzz,vmaf,2\n".as_bytes(), &m);
        assert!(matches!(bad, Err(Error::UnknownStimulus { line: 3, .. })));
        let bad = ingest_external_scores("stimulus_id,metric,value\na,vmaf,x\n".as_bytes(), &m);
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("vmaf".parse::<Metric>().is_err());
    }
}
