use std::fs;
use std::path::PathBuf;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{quantize, read_clip, write_clip, write_sidecar, Clip, Plane};

/// Parametric stand-in for a block-transform encoder.
///
/// Bitrate follows `R(qp) = r0 * (coded_rate / source_rate)^rate_exponent *
/// 2^(-(qp - qp0) / halving_qp)` where the rates are luma samples per second.
/// Decoding adds zero-mean Gaussian noise whose variance doubles every
/// `noise_doubling_qp` steps, `sigma(qp0) = noise_sigma0` in 8-bit codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCodec {
    pub r0_bps: f64,
    pub qp0: f64,
    pub halving_qp: f64,
    pub rate_exponent: f64,
    pub noise_sigma0: f64,
    pub noise_doubling_qp: f64,
    pub seed: u64,
}

impl Default for SyntheticCodec {
    fn default() -> Self {
        SyntheticCodec {
            r0_bps: 8e6,
            qp0: 29.0,
            halving_qp: 6.0,
            rate_exponent: 1.0,
            noise_sigma0: 3.0,
            noise_doubling_qp: 6.0,
            seed: 0x5eed,
        }
    }
}

impl SyntheticCodec {
    pub fn bitrate(&self, qp: u8, pixel_ratio: f64) -> f64 {
        self.r0_bps
            * pixel_ratio.powf(self.rate_exponent)
            * 2f64.powf(-(qp as f64 - self.qp0) / self.halving_qp)
    }

    /// Noise variance at `qp` in 8-bit code units.
    pub fn noise_variance(&self, qp: u8) -> f64 {
        self.noise_sigma0 * self.noise_sigma0 * 2f64.powf((qp as f64 - self.qp0) / self.noise_doubling_qp)
    }

    fn degrade(&self, clip: &Clip, qp: u8) -> Result<Clip> {
        let f = &clip.format;
        let scale = (1u32 << (f.bit_depth - 8)) as f64;
        let sigma = self.noise_variance(qp).sqrt() * scale;
        let max = f.max_code();
        let mut stream = self.seed ^ ((qp as u64) << 48) ^ ((f.width as u64) << 24) ^ f.height as u64;
        stream = stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        let frames = clip
            .frames
            .iter()
            .enumerate()
            .map(|(t, frame)| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream ^ t as u64);
                let mut out = frame.clone();
                for plane in out.planes.iter_mut() {
                    let noisy: Vec<u16> = plane
                        .data
                        .iter()
                        .map(|&s| quantize(s as f64 + normal.sample(&mut rng), max))
                        .collect();
                    *plane = Plane::new(plane.width, plane.height, noisy);
                }
                out
            })
            .collect();
        Clip::new(f.clone(), frames)
    }
}

/// Shell command templates for a real encoder/decoder pair.
///
/// Placeholders: `{input}`, `{output}`, `{width}`, `{height}`, `{fps}`,
/// `{qp}`, `{keyint}`, `{bit_depth}`, `{pix_fmt}`. The encode template must
/// contain `{keyint}`, which is set to one second of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCodec {
    pub encode: String,
    pub decode: String,
}

impl ExternalCodec {
    pub fn new(encode: impl Into<String>, decode: impl Into<String>) -> Result<Self> {
        let codec = ExternalCodec {
            encode: encode.into(),
            decode: decode.into(),
        };
        if !codec.encode.contains("{keyint}") {
            return Err(Error::Config(
                "encode template must pin the intra period with {keyint}".into(),
            ));
        }
        Ok(codec)
    }

    fn expand(template: &str, clip: &Clip, qp: u8, input: &str, output: &str) -> String {
        let f = &clip.format;
        let pix_fmt = match (f.bit_depth, f.chroma) {
            (8, crate::video::ChromaFormat::Yuv420) => "yuv420p",
            (8, _) => "yuv422p",
            (_, crate::video::ChromaFormat::Yuv420) => "yuv420p10le",
            _ => "yuv422p10le",
        };
        template
            .replace("{input}", input)
            .replace("{output}", output)
            .replace("{width}", &f.width.to_string())
            .replace("{height}", &f.height.to_string())
            .replace("{fps}", &f.fps.to_string())
            .replace("{qp}", &qp.to_string())
            .replace("{keyint}", &(f.fps.round().max(1.0) as u64).to_string())
            .replace("{bit_depth}", &f.bit_depth.to_string())
            .replace("{pix_fmt}", pix_fmt)
    }

    fn run(cmd: &str) -> Result<()> {
        let out = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .output()
            .map_err(|e| Error::EncoderFailure {
                status: "spawn failed".into(),
                diagnostics: e.to_string(),
            })?;
        if !out.status.success() {
            return Err(Error::EncoderFailure {
                status: out.status.to_string(),
                diagnostics: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(())
    }

    fn encode_to(&self, clip: &Clip, qp: u8) -> Result<(tempfile::TempDir, PathBuf, f64)> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let raw = dir.path().join("input.yuv");
        write_clip(clip, &raw)?;
        let bitstream = dir.path().join("stream.bin");
        Self::run(&Self::expand(
            &self.encode,
            clip,
            qp,
            &raw.to_string_lossy(),
            &bitstream.to_string_lossy(),
        ))?;
        let bytes = fs::metadata(&bitstream)
            .map_err(|e| Error::io(&bitstream, e))?
            .len();
        let bitrate = bytes as f64 * 8.0 / clip.format.duration();
        Ok((dir, bitstream, bitrate))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CodecDriver {
    Synthetic(SyntheticCodec),
    External(ExternalCodec),
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub decoded: Clip,
    /// bits per second
    pub bitrate: f64,
}

impl CodecDriver {
    /// Bitrate of `clip` coded at `qp`. `source_pixel_rate` is the luma
    /// sample rate of the unsubsampled source.
    pub fn measure_bitrate(&self, clip: &Clip, qp: u8, source_pixel_rate: f64) -> Result<f64> {
        match self {
            CodecDriver::Synthetic(s) => Ok(s.bitrate(qp, clip.format.pixel_rate() / source_pixel_rate)),
            CodecDriver::External(e) => e.encode_to(clip, qp).map(|(_, _, rate)| rate),
        }
    }

    pub fn encode(&self, clip: &Clip, qp: u8, source_pixel_rate: f64) -> Result<Encoded> {
        match self {
            CodecDriver::Synthetic(s) => Ok(Encoded {
                decoded: s.degrade(clip, qp)?,
                bitrate: s.bitrate(qp, clip.format.pixel_rate() / source_pixel_rate),
            }),
            CodecDriver::External(e) => {
                let (dir, bitstream, bitrate) = e.encode_to(clip, qp)?;
                let decoded_path = dir.path().join("decoded.yuv");
                ExternalCodec::run(&ExternalCodec::expand(
                    &e.decode,
                    clip,
                    qp,
                    &bitstream.to_string_lossy(),
                    &decoded_path.to_string_lossy(),
                ))?;
                let meta = dir.path().join("decoded.json");
                write_sidecar(&clip.format, &meta)?;
                Ok(Encoded {
                    decoded: read_clip(&decoded_path, &meta)?,
                    bitrate,
                })
            }
        }
    }
}
