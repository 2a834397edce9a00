//! Per-content target-bitrate selection and QP determination across
//! space-time configurations, and the stimulus build pipeline
//! (subsample, encode, decode, restore to display format).

mod codec;
mod generate;
mod stimulus;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use codec::{CodecDriver, Encoded, ExternalCodec, SyntheticCodec};
pub use generate::{generate_content, GeneratedContent};
pub use stimulus::{build_stimulus, coded_clip, probe_rd, BuiltStimulus, StimulusSpec};

pub const MAX_QP: u8 = 51;
pub const LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialLevel {
    #[serde(rename = "540p")]
    P540,
    #[serde(rename = "720p")]
    P720,
    #[serde(rename = "1080p")]
    P1080,
    #[serde(rename = "2160p")]
    P2160,
}

impl SpatialLevel {
    pub const ALL: [SpatialLevel; 4] = [
        SpatialLevel::P2160,
        SpatialLevel::P1080,
        SpatialLevel::P720,
        SpatialLevel::P540,
    ];

    /// Linear downscale factor relative to the display format
    /// (3840x2160 -> 1920x1080, 1280x720, 960x540).
    pub fn divisor(self) -> usize {
        match self {
            SpatialLevel::P2160 => 1,
            SpatialLevel::P1080 => 2,
            SpatialLevel::P720 => 3,
            SpatialLevel::P540 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpatialLevel::P540 => "540p",
            SpatialLevel::P720 => "720p",
            SpatialLevel::P1080 => "1080p",
            SpatialLevel::P2160 => "2160p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalLevel {
    Half,
    Full,
}

impl TemporalLevel {
    pub fn label(self) -> &'static str {
        match self {
            TemporalLevel::Full => "full",
            TemporalLevel::Half => "half",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceTimeConfig {
    pub spatial: SpatialLevel,
    pub temporal: TemporalLevel,
}

impl SpaceTimeConfig {
    pub const FULL: SpaceTimeConfig = SpaceTimeConfig {
        spatial: SpatialLevel::P2160,
        temporal: TemporalLevel::Full,
    };

    pub fn new(spatial: SpatialLevel, temporal: TemporalLevel) -> Self {
        SpaceTimeConfig { spatial, temporal }
    }

    /// All eight configurations, full resolution and full rate first.
    pub fn all() -> Vec<SpaceTimeConfig> {
        [TemporalLevel::Full, TemporalLevel::Half]
            .into_iter()
            .flat_map(|t| SpatialLevel::ALL.into_iter().map(move |s| SpaceTimeConfig::new(s, t)))
            .collect()
    }

    pub fn is_subsampled(self) -> bool {
        self != SpaceTimeConfig::FULL
    }

    /// Coded frame size for a display frame of `width`x`height`: divided by
    /// the spatial divisor and rounded to the nearest even size, at least 16.
    pub fn coded_dims(self, width: usize, height: usize) -> (usize, usize) {
        let d = self.spatial.divisor();
        if d == 1 {
            return (width, height);
        }
        let even = |v: usize| (((v as f64 / d as f64) / 2.0).round() as usize * 2).max(16);
        (even(width), even(height))
    }
}

impl fmt::Display for SpaceTimeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.spatial.label(), self.temporal.label())
    }
}

/// One probed operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdSample {
    pub config: SpaceTimeConfig,
    pub qp: u8,
    /// bits per second
    pub bitrate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderChoice {
    pub config: SpaceTimeConfig,
    /// 1 = highest target bitrate.
    pub level: u8,
    pub qp: u8,
    pub expected_bitrate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub content: String,
    /// Strictly decreasing, level 1 first.
    pub targets: [f64; LEVELS],
    pub choices: Vec<LadderChoice>,
}

fn samples_by_config(samples: &[RdSample]) -> Vec<(SpaceTimeConfig, Vec<RdSample>)> {
    let mut groups: Vec<(SpaceTimeConfig, Vec<RdSample>)> = Vec::new();
    for s in samples {
        match groups.iter_mut().find(|(c, _)| *c == s.config) {
            Some((_, v)) => v.push(*s),
            None => groups.push((s.config, vec![*s])),
        }
    }
    for (_, v) in &mut groups {
        v.sort_by_key(|s| s.qp);
    }
    groups
}

/// Five geometrically spaced target bitrates for one content.
///
/// Level 1 is the full-resolution, full-rate bitrate at the lowest probed
/// QP. Level 5 is the lowest bitrate every probed configuration can reach,
/// i.e. the largest of the per-configuration minima.
pub fn select_targets(samples: &[RdSample]) -> Result<[f64; LEVELS]> {
    let groups = samples_by_config(samples);
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "target selection needs at least 2 configurations, got {}",
            groups.len()
        )));
    }
    if let Some((c, v)) = groups.iter().find(|(_, v)| v.len() < 3) {
        return Err(Error::InvalidArgument(format!(
            "configuration {c} has {} probed QPs, need at least 3",
            v.len()
        )));
    }
    let top = groups
        .iter()
        .find(|(c, _)| *c == SpaceTimeConfig::FULL)
        .map(|(_, v)| v[0].bitrate)
        .unwrap_or_else(|| samples.iter().map(|s| s.bitrate).fold(0.0, f64::max));
    let bottom = groups
        .iter()
        .map(|(_, v)| v.iter().map(|s| s.bitrate).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    if !(top > bottom && bottom > 0.0) {
        return Err(Error::DegenerateRd(format!(
            "top bitrate {top} does not exceed bottom bitrate {bottom}"
        )));
    }
    let ratio = bottom / top;
    Ok(std::array::from_fn(|l| {
        if l == LEVELS - 1 {
            bottom
        } else {
            top * ratio.powf(l as f64 / (LEVELS - 1) as f64)
        }
    }))
}

/// Integer QP whose bitrate is closest to `target`. Unprobed QPs between two
/// probed ones take a log-linearly interpolated bitrate; ties go to the lower
/// QP.
pub fn solve_qp(samples: &[RdSample], target: f64) -> Result<u8> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "QP search needs at least 2 probed samples".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.qp);

    let mut best: Option<(u8, f64)> = None;
    let mut consider = |qp: u8, bitrate: f64| {
        let err = (bitrate - target).abs();
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((qp, err));
        }
    };
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        consider(a.qp, a.bitrate);
        let span = (b.qp - a.qp) as f64;
        for qp in a.qp + 1..b.qp {
            let t = (qp - a.qp) as f64 / span;
            consider(qp, (a.bitrate.ln() * (1.0 - t) + b.bitrate.ln() * t).exp());
        }
    }
    let last = sorted[sorted.len() - 1];
    consider(last.qp, last.bitrate);
    Ok(best.expect("non-empty").0)
}

fn bitrate_at(samples: &[RdSample], qp: u8) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by_key(|s| s.qp);
    if let Some(s) = sorted.iter().find(|s| s.qp == qp) {
        return s.bitrate;
    }
    let hi = sorted.iter().position(|s| s.qp > qp).unwrap_or(sorted.len() - 1);
    let (a, b) = (sorted[hi.saturating_sub(1)], sorted[hi]);
    let t = (qp as f64 - a.qp as f64) / (b.qp as f64 - a.qp as f64);
    (a.bitrate.ln() * (1.0 - t) + b.bitrate.ln() * t).exp()
}

/// Selects targets and solves a QP per configuration and level. When a
/// configuration lands on the same QP for several levels, only the level
/// whose target is closest (in log terms) to the expected bitrate is kept.
pub fn plan_ladder(content: &str, samples: &[RdSample]) -> Result<LadderSpec> {
    let targets = select_targets(samples)?;
    let mut choices = Vec::new();
    for (config, group) in samples_by_config(samples) {
        let mut picked: Vec<LadderChoice> = Vec::new();
        for (l, &target) in targets.iter().enumerate() {
            let qp = solve_qp(&group, target)?;
            let expected = bitrate_at(&group, qp);
            let choice = LadderChoice {
                config,
                level: l as u8 + 1,
                qp,
                expected_bitrate: expected,
            };
            let miss = |c: &LadderChoice| (c.expected_bitrate / targets[c.level as usize - 1]).ln().abs();
            match picked.iter_mut().find(|c| c.qp == qp) {
                Some(existing) if miss(&choice) < miss(existing) => *existing = choice,
                Some(_) => {}
                None => picked.push(choice),
            }
        }
        choices.extend(picked);
    }
    Ok(LadderSpec {
        content: content.to_string(),
        targets,
        choices,
    })
}
