use serde::{Deserialize, Serialize};

use super::{CodecDriver, RdSample, SpaceTimeConfig, TemporalLevel, MAX_QP};
use crate::error::{Error, Result};
use crate::manifest::StageLog;
use crate::video::{
    resize_lanczos, temporal_downsample, temporal_upsample_lfi, Clip, ClipFormat, ResampleSpec,
};

/// Recipe for one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub content: String,
    pub config: SpaceTimeConfig,
    pub qp: Option<u8>,
    pub target_level: Option<u8>,
    pub is_reference: bool,
}

impl StimulusSpec {
    pub fn reference(content: impl Into<String>) -> Self {
        StimulusSpec {
            content: content.into(),
            config: SpaceTimeConfig::FULL,
            qp: None,
            target_level: None,
            is_reference: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltStimulus {
    pub clip: Clip,
    pub achieved_bitrate: Option<f64>,
    pub stages: StageLog,
}

/// Applies the spatial and temporal subsampling of `config` to a
/// display-format source.
pub fn coded_clip(source: &Clip, config: SpaceTimeConfig) -> Result<Clip> {
    let (w, h) = config.coded_dims(source.format.width, source.format.height);
    let mut clip = if (w, h) == (source.format.width, source.format.height) {
        source.clone()
    } else {
        resize_lanczos(source, &ResampleSpec::new(w, h))?
    };
    if config.temporal == TemporalLevel::Half {
        clip = temporal_downsample(&clip)?;
    }
    Ok(clip)
}

/// Encodes the subsampled version of `clip` at each QP and returns the
/// measured bitrates, sorted by QP and cleaned so bitrate strictly decreases
/// (a sample not below its predecessor is dropped).
pub fn probe_rd(
    clip: &Clip,
    config: SpaceTimeConfig,
    qps: &[u8],
    driver: &CodecDriver,
) -> Result<Vec<RdSample>> {
    if qps.is_empty() {
        return Err(Error::InvalidArgument("no QPs to probe".into()));
    }
    if let Some(&bad) = qps.iter().find(|&&q| q > MAX_QP) {
        return Err(Error::InvalidArgument(format!("QP {bad} outside [0, {MAX_QP}]")));
    }
    let coded = coded_clip(clip, config)?;
    let source_rate = clip.format.pixel_rate();
    let mut qps = qps.to_vec();
    qps.sort_unstable();
    qps.dedup();

    let mut samples: Vec<RdSample> = Vec::with_capacity(qps.len());
    for qp in qps {
        let bitrate = driver.measure_bitrate(&coded, qp, source_rate)?;
        if samples.last().is_none_or(|prev| bitrate < prev.bitrate) {
            samples.push(RdSample {
                config,
                qp,
                bitrate,
            });
        }
    }
    Ok(samples)
}

/// Runs the display pipeline for one stimulus: spatial downsample, temporal
/// downsample, encode/decode, LFI temporal upsample, Lanczos spatial
/// upsample. The output always has the source's display format.
pub fn build_stimulus(source: &Clip, spec: &StimulusSpec, driver: &CodecDriver) -> Result<BuiltStimulus> {
    let display = &source.format;
    let (cw, ch) = spec.config.coded_dims(display.width, display.height);
    let coded_fps = match spec.config.temporal {
        TemporalLevel::Full => display.fps,
        TemporalLevel::Half => display.fps / 2.0,
    };
    let stages = StageLog {
        coded_width: if spec.is_reference { display.width } else { cw },
        coded_height: if spec.is_reference { display.height } else { ch },
        coded_fps: if spec.is_reference { display.fps } else { coded_fps },
        lanczos_taps: ResampleSpec::new(16, 16).kernel_taps,
        temporal_upsampling: if !spec.is_reference && spec.config.temporal == TemporalLevel::Half {
            "lfi".into()
        } else {
            "none".into()
        },
        display_width: display.width,
        display_height: display.height,
        display_fps: display.fps,
    };
    if spec.is_reference {
        return Ok(BuiltStimulus {
            clip: source.clone(),
            achieved_bitrate: None,
            stages,
        });
    }
    let qp = spec
        .qp
        .ok_or_else(|| Error::InvalidArgument("distorted stimulus needs a QP".into()))?;

    let coded = coded_clip(source, spec.config)?;
    let encoded = driver.encode(&coded, qp, display.pixel_rate())?;
    let mut restored = encoded.decoded;
    if spec.config.temporal == TemporalLevel::Half {
        restored = temporal_upsample_lfi(&restored, display.fps)?;
        restored.frames.truncate(display.frame_count);
        restored = Clip::new(
            ClipFormat {
                frame_count: restored.frames.len(),
                ..restored.format
            },
            restored.frames,
        )?;
    }
    if (restored.format.width, restored.format.height) != (display.width, display.height) {
        restored = resize_lanczos(&restored, &ResampleSpec::new(display.width, display.height))?;
    }
    debug_assert_eq!(restored.format, *display);
    Ok(BuiltStimulus {
        clip: restored,
        achieved_bitrate: Some(encoded.bitrate),
        stages,
    })
}
