//! Synthetic scenes and simulated subject panels for desk-scale studies,
//! benches and end-to-end tests.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::design::{Playlist, PlaylistItem};
use crate::error::Result;
use crate::ladder::{SpaceTimeConfig, SpatialLevel, TemporalLevel};
use crate::manifest::{stimulus_id, Manifest, ManifestEntry};
use crate::scores::{RawScore, ScoreMatrix};
use crate::session::MAX_SCORE;
use crate::video::{quantize, ChromaFormat, Clip, ClipFormat, Frame, Plane};

/// Parameters of a moving sum-of-gratings scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// amplitude of fine texture (periods of 3 to 8 pixels), 8-bit codes
    pub detail: f64,
    /// amplitude of coarse structure, 8-bit codes
    pub structure: f64,
    /// horizontal and vertical motion, pixels per frame
    pub motion: (f64, f64),
    /// chroma excursion, 8-bit codes
    pub color: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            detail: 24.0,
            structure: 50.0,
            motion: (1.0, 0.5),
            color: 30.0,
            seed: 1,
        }
    }
}

struct Grating {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

fn gratings(rng: &mut ChaCha8Rng, count: usize, period: (f64, f64), amp: f64) -> Vec<Grating> {
    (0..count)
        .map(|_| {
            let p = rng.random_range(period.0..period.1);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let f = std::f64::consts::TAU / p;
            Grating {
                fx: f * theta.cos(),
                fy: f * theta.sin(),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                amp: amp / (count as f64).sqrt(),
            }
        })
        .collect()
}

fn field(g: &[Grating], x: f64, y: f64) -> f64 {
    g.iter().map(|g| g.amp * (g.fx * x + g.fy * y + g.phase).sin()).sum()
}

/// An 8-bit 4:2:0 clip of drifting gratings.
pub fn synthetic_clip(width: usize, height: usize, frames: usize, fps: f64, p: &SceneParams) -> Result<Clip> {
    let format = ClipFormat {
        width,
        height,
        fps,
        bit_depth: 8,
        chroma: ChromaFormat::Yuv420,
        frame_count: frames,
    };
    format.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let fine = gratings(&mut rng, 6, (3.0, 8.0), p.detail);
    let coarse = gratings(&mut rng, 4, (24.0, 96.0), p.structure);
    let cb = gratings(&mut rng, 2, (32.0, 128.0), p.color);
    let cr = gratings(&mut rng, 2, (32.0, 128.0), p.color);
    let (cw, ch) = format.chroma_dims();
    let out = (0..frames)
        .map(|t| {
            let (ox, oy) = (p.motion.0 * t as f64, p.motion.1 * t as f64);
            let mut luma = Vec::with_capacity(width * height);
            for y in 0..height {
                for x in 0..width {
                    let (sx, sy) = (x as f64 - ox, y as f64 - oy);
                    luma.push(quantize(128.0 + field(&coarse, sx, sy) + field(&fine, sx, sy), 255));
                }
            }
            let chroma = |g: &[Grating]| -> Vec<u16> {
                let mut v = Vec::with_capacity(cw * ch);
                for y in 0..ch {
                    for x in 0..cw {
                        let (sx, sy) = (2.0 * x as f64 - ox, 2.0 * y as f64 - oy);
                        v.push(quantize(128.0 + field(g, sx, sy), 255));
                    }
                }
                v
            };
            Frame::new(
                Plane::new(width, height, luma),
                Plane::new(cw, ch, chroma(&cb)),
                Plane::new(cw, ch, chroma(&cr)),
            )
        })
        .collect();
    Clip::new(format, out)
}

/// How a simulated subject turns latent quality into a vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SubjectModel {
    /// `gain * q + offset + N(0, sigma)`, rounded and clamped to the scale
    Consistent { gain: f64, offset: f64 },
    /// uniform over the whole scale, ignoring the stimulus
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPanel {
    pub subjects: Vec<SubjectModel>,
    pub noise_sigma: f64,
}

impl SubjectPanel {
    /// `consistent` subjects with gains in [0.85, 1.15] and offsets in
    /// [-2, 2], followed by `random` subjects.
    pub fn generate(consistent: usize, random: usize, noise_sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut subjects: Vec<SubjectModel> = (0..consistent)
            .map(|_| SubjectModel::Consistent {
                gain: rng.random_range(0.85..1.15),
                offset: rng.random_range(-2.0..2.0),
            })
            .collect();
        subjects.extend(std::iter::repeat_n(SubjectModel::Random, random));
        SubjectPanel {
            subjects,
            noise_sigma,
        }
    }

    /// 1-based ids of the random subjects.
    pub fn random_subjects(&self) -> Vec<u32> {
        self.subjects
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, SubjectModel::Random))
            .map(|(i, _)| i as u32 + 1)
            .collect()
    }

    fn vote(&self, subject: usize, quality: f64, rng: &mut ChaCha8Rng, noise: &Normal<f64>) -> f64 {
        let max = MAX_SCORE as f64;
        match self.subjects[subject] {
            SubjectModel::Consistent { gain, offset } => {
                (gain * quality + offset + noise.sample(rng)).round().clamp(0.0, max)
            }
            SubjectModel::Random => rng.random_range(0..=MAX_SCORE) as f64,
        }
    }

    /// Votes for every playlist, participant `p` played by subject `p`.
    /// `quality` maps stimulus id to latent quality on the 0-39 scale.
    pub fn simulate(
        &self,
        playlists: &[Playlist],
        manifest: &Manifest,
        quality: &HashMap<String, f64>,
        seed: u64,
    ) -> Result<ScoreMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        let index = manifest.index();
        let mut scores = Vec::new();
        for pl in playlists {
            let subject = pl.participant as usize - 1;
            if subject >= self.subjects.len() {
                continue;
            }
            for item in &pl.items {
                let e = index[item.stimulus_id.as_str()];
                let q = quality.get(&item.stimulus_id).copied().unwrap_or(0.0);
                scores.push(RawScore {
                    subject: pl.participant,
                    session: pl.session,
                    stimulus_id: item.stimulus_id.clone(),
                    content: e.content.clone(),
                    is_reference: e.is_reference,
                    score: self.vote(subject, q, &mut rng, &noise),
                });
            }
        }
        ScoreMatrix::new(scores)
    }
}

/// One single-session playlist per participant covering every stimulus in
/// manifest order, for studies too small for the constrained design.
pub fn full_playlists(manifest: &Manifest, participants: u32) -> Vec<Playlist> {
    let items: Vec<PlaylistItem> = manifest
        .entries
        .iter()
        .map(|e| PlaylistItem {
            stimulus_id: e.stimulus_id.clone(),
            media_path: e.media_path.clone(),
        })
        .collect();
    (1..=participants)
        .map(|participant| Playlist {
            participant,
            session: 1,
            seed: 0,
            items: items.clone(),
        })
        .collect()
}

/// Latent quality given to hidden references.
pub const REFERENCE_QUALITY: f64 = 36.0;

/// A score-only study: `distorted` stimuli dealt over `contents` contents
/// (spread over the eight configurations and five levels) and one reference
/// per content. Distorted latent quality is uniform in [4, 32].
pub fn score_study(contents: usize, distorted: usize, seed: u64) -> (Manifest, HashMap<String, f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = SpaceTimeConfig::all();
    let mut entries = Vec::new();
    let mut quality = HashMap::new();
    for c in 0..contents {
        let content = format!("content{c:02}");
        let rid = stimulus_id(&content, SpaceTimeConfig::FULL, None, None, true);
        quality.insert(rid.clone(), REFERENCE_QUALITY);
        entries.push(ManifestEntry {
            stimulus_id: rid.clone(),
            content: content.clone(),
            spatial: SpatialLevel::P2160,
            temporal: TemporalLevel::Full,
            qp: None,
            target_level: None,
            achieved_bitrate: None,
            is_reference: true,
            media_path: format!("{rid}.yuv"),
            stages: None,
        });
        let per_content = distorted / contents + usize::from(c < distorted % contents);
        for k in 0..per_content {
            let config = configs[k % configs.len()];
            let level = (k / configs.len()) % 5 + 1;
            let qp = 22 + (k % 30) as u8;
            let id = stimulus_id(&content, config, Some(qp), Some(level as u8), false);
            quality.insert(id.clone(), rng.random_range(4.0..32.0));
            entries.push(ManifestEntry {
                stimulus_id: id.clone(),
                content: content.clone(),
                spatial: config.spatial,
                temporal: config.temporal,
                qp: Some(qp),
                target_level: Some(level as u8),
                achieved_bitrate: None,
                is_reference: false,
                media_path: format!("{id}.yuv"),
                stages: None,
            });
        }
    }
    (Manifest { entries }, quality)
}

/// Maps luma PSNR in dB to latent quality on the 0-39 scale, linearly from
/// `floor_db` (0) to `ceil_db` (39).
pub fn psnr_to_quality(psnr: f64, floor_db: f64, ceil_db: f64) -> f64 {
    ((psnr - floor_db) / (ceil_db - floor_db)).clamp(0.0, 1.0) * MAX_SCORE as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::design_study;

    #[test]
    fn scene_is_deterministic_and_moving() {
        let p = SceneParams::default();
        let a = synthetic_clip(64, 36, 3, 60.0, &p).unwrap();
        assert_eq!(a, synthetic_clip(64, 36, 3, 60.0, &p).unwrap());
        assert_ne!(a.frames[0], a.frames[1]);
    }

    #[test]
    fn score_study_shape() {
        let (m, q) = score_study(15, 437, 1);
        assert_eq!(m.distorted().count(), 437);
        assert_eq!(m.references().len(), 15);
        assert_eq!(q.len(), 452);
    }

    #[test]
    fn every_subject_rates_everything() {
        let (m, q) = score_study(15, 435, 2);
        let design = design_study(&m, 30, 3).unwrap();
        let panel = SubjectPanel::generate(27, 3, 3.0, 4);
        assert_eq!(panel.random_subjects(), vec![28, 29, 30]);
        let scores = panel.simulate(&design.playlists, &m, &q, 5).unwrap();
        assert_eq!(scores.scores.len(), 30 * (435 + 45));
        assert!(scores.scores.iter().all(|s| (0.0..=39.0).contains(&s.score)));
    }
}
