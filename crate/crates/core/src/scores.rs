//! Opinion-score processing: difference scores against the hidden
//! reference, per-session z-scores, kurtosis-gated subject rejection,
//! rescaling to [0, 100], the MOS variant and split-half consistency.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::ExportRow;
use crate::stats;

/// One raw vote `s_ijk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScore {
    pub subject: u32,
    pub session: u8,
    pub stimulus_id: String,
    pub content: String,
    pub is_reference: bool,
    pub score: f64,
}

/// Raw scores plus the content -> reference map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    pub scores: Vec<RawScore>,
    pub references: BTreeMap<String, String>,
}

impl ScoreMatrix {
    pub fn new(scores: Vec<RawScore>) -> Result<Self> {
        let mut references = BTreeMap::new();
        for s in scores.iter().filter(|s| s.is_reference) {
            if let Some(prev) = references.insert(s.content.clone(), s.stimulus_id.clone()) {
                if prev != s.stimulus_id {
                    return Err(Error::Validation(format!(
                        "content {} has two references ({prev}, {})",
                        s.content, s.stimulus_id
                    )));
                }
            }
        }
        Ok(ScoreMatrix { scores, references })
    }

    /// Reads the session server's CSV export.
    pub fn from_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut scores = Vec::new();
        for (i, row) in rdr.deserialize::<ExportRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: e.position().map_or(i + 2, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            scores.push(RawScore {
                subject: row.participant,
                session: row.session,
                stimulus_id: row.stimulus_id,
                content: row.content,
                is_reference: row.is_reference,
                score: row.raw_score as f64,
            });
        }
        Self::new(scores)
    }
}

/// One transformed score `d_ijk` (a difference score for DMOS, the raw score
/// for MOS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffScore {
    pub subject: u32,
    pub session: u8,
    pub stimulus_id: String,
    pub d: f64,
}

/// `d_ijk = s_(i, ref(j), k) - s_ijk` for every distorted vote. Reference
/// self-differences are dropped.
pub fn difference_scores(matrix: &ScoreMatrix) -> Result<Vec<DiffScore>> {
    let mut ref_scores: HashMap<(u32, u8, &str), f64> = HashMap::new();
    for s in matrix.scores.iter().filter(|s| s.is_reference) {
        ref_scores.insert((s.subject, s.session, s.content.as_str()), s.score);
    }
    matrix
        .scores
        .iter()
        .filter(|s| !s.is_reference)
        .map(|s| {
            let r = ref_scores
                .get(&(s.subject, s.session, s.content.as_str()))
                .ok_or_else(|| Error::MissingReference {
                    subject: s.subject.to_string(),
                    video: s.stimulus_id.clone(),
                    session: s.session as u32,
                })?;
            Ok(DiffScore {
                subject: s.subject,
                session: s.session,
                stimulus_id: s.stimulus_id.clone(),
                d: r - s.score,
            })
        })
        .collect()
}

/// `d_ijk = s_ijk`, references retained.
pub fn raw_as_diff(matrix: &ScoreMatrix) -> Vec<DiffScore> {
    matrix
        .scores
        .iter()
        .map(|s| DiffScore {
            subject: s.subject,
            session: s.session,
            stimulus_id: s.stimulus_id.clone(),
            d: s.score,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub subject: u32,
    pub session: u8,
    pub n: usize,
    pub mean: f64,
    /// sample standard deviation
    pub std: f64,
    /// `std == 0` or fewer than two scores; the subject-session is excluded.
    pub degenerate: bool,
}

/// Per subject-video z-scores, dense over `subjects x videos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZMatrix {
    pub subjects: Vec<u32>,
    pub videos: Vec<String>,
    /// `z[subject][video]`, `None` where the subject has no usable score.
    pub z: Vec<Vec<Option<f64>>>,
    pub sessions: Vec<SessionStats>,
}

impl ZMatrix {
    pub fn get(&self, subject: u32, video: &str) -> Option<f64> {
        let i = self.subjects.iter().position(|&s| s == subject)?;
        let j = self.videos.iter().position(|v| v == video)?;
        self.z[i][j]
    }

    pub fn degenerate_sessions(&self) -> impl Iterator<Item = &SessionStats> {
        self.sessions.iter().filter(|s| s.degenerate)
    }
}

/// Standardizes each subject-session. A video scored in several sessions
/// by the same subject (references under MOS) gets the mean of its z-scores.
pub fn session_zscores(diffs: &[DiffScore]) -> ZMatrix {
    let mut by_session: BTreeMap<(u32, u8), Vec<&DiffScore>> = BTreeMap::new();
    for d in diffs {
        by_session.entry((d.subject, d.session)).or_default().push(d);
    }
    let subjects: Vec<u32> = by_session.keys().map(|k| k.0).collect::<BTreeSet<_>>().into_iter().collect();
    let videos: Vec<String> = diffs
        .iter()
        .map(|d| d.stimulus_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let si: HashMap<u32, usize> = subjects.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let vi: HashMap<&str, usize> = videos.iter().enumerate().map(|(j, v)| (v.as_str(), j)).collect();

    let mut sum = vec![vec![0.0; videos.len()]; subjects.len()];
    let mut count = vec![vec![0u32; videos.len()]; subjects.len()];
    let mut sessions = Vec::with_capacity(by_session.len());
    for ((subject, session), ds) in &by_session {
        let values: Vec<f64> = ds.iter().map(|d| d.d).collect();
        let n = values.len();
        let mean = stats::mean(&values);
        let std = if n >= 2 { stats::sample_std(&values) } else { 0.0 };
        let degenerate = n < 2 || std == 0.0;
        sessions.push(SessionStats {
            subject: *subject,
            session: *session,
            n,
            mean,
            std,
            degenerate,
        });
        if degenerate {
            continue;
        }
        let i = si[subject];
        for d in ds {
            let j = vi[d.stimulus_id.as_str()];
            sum[i][j] += (d.d - mean) / std;
            count[i][j] += 1;
        }
    }
    let z = sum
        .into_iter()
        .zip(count)
        .map(|(row, cnt)| {
            row.into_iter()
                .zip(cnt)
                .map(|(s, c)| (c > 0).then(|| s / c as f64))
                .collect()
        })
        .collect();
    ZMatrix {
        subjects,
        videos,
        z,
        sessions,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoStats {
    pub video: String,
    pub n: usize,
    pub mean: f64,
    /// sample standard deviation over subjects
    pub std: f64,
    /// `m4 / m2^2` with population moments
    pub kurtosis: f64,
    /// zero spread; no outlier flags counted
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectFlags {
    pub subject: u32,
    /// scores above the upper threshold
    pub p: usize,
    /// scores below the lower threshold
    pub q: usize,
    /// videos evaluated by the subject that were eligible for flagging
    pub n_videos: usize,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub subjects: Vec<SubjectFlags>,
    pub videos: Vec<VideoStats>,
    pub rejected: Vec<u32>,
}

pub const FLAG_RATE: f64 = 0.05;
pub const BALANCE: f64 = 0.3;

/// Single-pass outlier-subject screening.
pub fn subject_rejection(z: &ZMatrix) -> RejectionReport {
    let ns = z.subjects.len();
    let mut p = vec![0usize; ns];
    let mut q = vec![0usize; ns];
    let mut opportunities = vec![0usize; ns];
    let mut videos = Vec::with_capacity(z.videos.len());
    for (j, video) in z.videos.iter().enumerate() {
        let col: Vec<(usize, f64)> = (0..ns).filter_map(|i| z.z[i][j].map(|v| (i, v))).collect();
        let n = col.len();
        let values: Vec<f64> = col.iter().map(|&(_, v)| v).collect();
        let mean = stats::mean(&values);
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(1) as f64;
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n.max(1) as f64;
        let skipped = n < 2 || m2 == 0.0;
        let (std, kurtosis) = if skipped {
            (0.0, f64::NAN)
        } else {
            (stats::sample_std(&values), m4 / (m2 * m2))
        };
        videos.push(VideoStats {
            video: video.clone(),
            n,
            mean,
            std,
            kurtosis,
            skipped,
        });
        if skipped {
            continue;
        }
        let k = if (2.0..=4.0).contains(&kurtosis) { 2.0 } else { 20f64.sqrt() };
        for &(i, v) in &col {
            opportunities[i] += 1;
            if v > mean + k * std {
                p[i] += 1;
            }
            if v < mean - k * std {
                q[i] += 1;
            }
        }
    }
    let subjects: Vec<SubjectFlags> = (0..ns)
        .map(|i| {
            let flagged = (p[i] + q[i]) as f64;
            let rejected = opportunities[i] > 0
                && flagged / opportunities[i] as f64 > FLAG_RATE
                && (p[i] as f64 - q[i] as f64).abs() / flagged < BALANCE;
            SubjectFlags {
                subject: z.subjects[i],
                p: p[i],
                q: q[i],
                n_videos: opportunities[i],
                rejected,
            }
        })
        .collect();
    let rejected = subjects.iter().filter(|s| s.rejected).map(|s| s.subject).collect();
    RejectionReport {
        subjects,
        videos,
        rejected,
    }
}

/// `100 (z + 3) / 6`, unclamped.
pub fn rescale(z: f64) -> f64 {
    100.0 * (z + 3.0) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Dmos,
    Mos,
}

impl ScoreKind {
    pub fn label(self) -> &'static str {
        match self {
            ScoreKind::Dmos => "dmos",
            ScoreKind::Mos => "mos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub stimulus_id: String,
    pub value: f64,
    pub std: f64,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionScores {
    pub kind: ScoreKind,
    pub videos: Vec<VideoScore>,
}

impl OpinionScores {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.videos.iter().find(|v| v.stimulus_id == id).map(|v| v.value)
    }

    pub fn as_map(&self) -> HashMap<&str, f64> {
        self.videos.iter().map(|v| (v.stimulus_id.as_str(), v.value)).collect()
    }

    /// CSV with columns `stimulus_id, <kind>, <kind>_std, n_subjects`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let k = self.kind.label();
        w.write_record(["stimulus_id", k, &format!("{k}_std"), "n_subjects"])?;
        for v in &self.videos {
            w.write_record([
                v.stimulus_id.clone(),
                v.value.to_string(),
                v.std.to_string(),
                v.n_subjects.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<scores>", e))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let kind = match rdr.headers()?.get(1) {
            Some("dmos") => ScoreKind::Dmos,
            Some("mos") => ScoreKind::Mos,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected dmos or mos column, found {other:?}"),
                })
            }
        };
        let mut videos = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(i + 2, |p| p.line() as usize);
            let field = |k: usize| -> Result<&str> {
                rec.get(k).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("missing column {}", k + 1),
                })
            };
            let num = |k: usize| -> Result<f64> {
                field(k)?.trim().parse().map_err(|e| Error::Parse {
                    line,
                    message: format!("{e}"),
                })
            };
            videos.push(VideoScore {
                stimulus_id: field(0)?.to_string(),
                value: num(1)?,
                std: num(2)?,
                n_subjects: num(3)? as usize,
            });
        }
        Ok(OpinionScores { kind, videos })
    }
}

/// Per-video mean and sample std of rescaled z over accepted subjects.
pub fn rescale_scores(z: &ZMatrix, rejected: &[u32], kind: ScoreKind) -> OpinionScores {
    let keep: Vec<usize> = (0..z.subjects.len())
        .filter(|&i| !rejected.contains(&z.subjects[i]))
        .collect();
    let videos = z
        .videos
        .iter()
        .enumerate()
        .filter_map(|(j, id)| {
            let vals: Vec<f64> = keep.iter().filter_map(|&i| z.z[i][j]).map(rescale).collect();
            if vals.is_empty() {
                return None;
            }
            Some(VideoScore {
                stimulus_id: id.clone(),
                value: stats::mean(&vals),
                std: if vals.len() > 1 { stats::sample_std(&vals) } else { 0.0 },
                n_subjects: vals.len(),
            })
        })
        .collect();
    OpinionScores { kind, videos }
}

pub fn rescale_to_dmos(z: &ZMatrix, rejected: &[u32]) -> OpinionScores {
    rescale_scores(z, rejected, ScoreKind::Dmos)
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Processed {
    pub z: ZMatrix,
    pub report: RejectionReport,
    pub scores: OpinionScores,
}

fn run(diffs: &[DiffScore], kind: ScoreKind) -> Processed {
    let z = session_zscores(diffs);
    let report = subject_rejection(&z);
    let scores = rescale_scores(&z, &report.rejected, kind);
    Processed { z, report, scores }
}

/// Difference-score pipeline producing DMOS (higher = worse).
pub fn compute_dmos(matrix: &ScoreMatrix) -> Result<Processed> {
    Ok(run(&difference_scores(matrix)?, ScoreKind::Dmos))
}

/// Same pipeline on raw scores, references kept (higher = better).
pub fn compute_mos(matrix: &ScoreMatrix) -> Processed {
    run(&raw_as_diff(matrix), ScoreKind::Mos)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitHalf {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub iterations: usize,
    /// one subject was left out of each split to equalize group sizes
    pub dropped_one: bool,
}

/// Repeatedly splits the accepted subjects into two equal random halves and
/// correlates the per-half opinion scores.
pub fn split_half_srcc(z: &ZMatrix, rejected: &[u32], iterations: usize, seed: u64) -> Result<SplitHalf> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("split-half needs at least one iteration".into()));
    }
    let accepted: Vec<usize> = (0..z.subjects.len())
        .filter(|&i| !rejected.contains(&z.subjects[i]))
        .collect();
    if accepted.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "split-half needs at least 4 accepted subjects, have {}",
            accepted.len()
        )));
    }
    let dropped_one = accepted.len() % 2 == 1;
    let half = accepted.len() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group_scores = |members: &[usize]| -> Vec<Option<f64>> {
        (0..z.videos.len())
            .map(|j| {
                let vals: Vec<f64> = members.iter().filter_map(|&i| z.z[i][j]).map(rescale).collect();
                (!vals.is_empty()).then(|| stats::mean(&vals))
            })
            .collect()
    };
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let mut order = accepted.clone();
        order.shuffle(&mut rng);
        let a = group_scores(&order[..half]);
        let b = group_scores(&order[half..2 * half]);
        let (x, y): (Vec<f64>, Vec<f64>) = a
            .into_iter()
            .zip(b)
            .filter_map(|(a, b)| Some((a?, b?)))
            .unzip();
        out.push(stats::spearman(&x, &y)?);
    }
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SplitHalf {
        median: stats::median(&out),
        min,
        max,
        iterations,
        dropped_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(subject: u32, session: u8, id: &str, content: &str, is_ref: bool, score: f64) -> RawScore {
        RawScore {
            subject,
            session,
            stimulus_id: id.into(),
            content: content.into(),
            is_reference: is_ref,
            score,
        }
    }

    #[test]
    fn difference_is_reference_minus_score() {
        let m = ScoreMatrix::new(vec![raw(1, 1, "r", "A", true, 39.0), raw(1, 1, "x", "A", false, 27.0)]).unwrap();
        let d = difference_scores(&m).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].d, 12.0);
    }

    #[test]
    fn missing_reference_names_cell() {
        let m = ScoreMatrix::new(vec![raw(1, 1, "r", "A", true, 39.0), raw(1, 2, "x", "A", false, 27.0)]).unwrap();
        match difference_scores(&m) {
            Err(Error::MissingReference { subject, video, session }) => {
                assert_eq!((subject.as_str(), video.as_str(), session), ("1", "x", 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_point_standardization() {
        let diffs = vec![
            DiffScore { subject: 1, session: 1, stimulus_id: "a".into(), d: 10.0 },
            DiffScore { subject: 1, session: 1, stimulus_id: "b".into(), d: 20.0 },
        ];
        let z = session_zscores(&diffs);
        assert!((z.sessions[0].std - 50f64.sqrt()).abs() < 1e-12);
        assert!((z.get(1, "a").unwrap() + 0.5f64.sqrt()).abs() < 1e-12);
        assert!((z.get(1, "b").unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_session_is_degenerate() {
        let m = ScoreMatrix::new(vec![
            raw(1, 1, "a", "A", false, 20.0),
            raw(1, 1, "b", "B", false, 20.0),
        ])
        .unwrap();
        let p = compute_mos(&m);
        assert_eq!(p.z.degenerate_sessions().count(), 1);
        assert!(p.scores.videos.is_empty());
    }

    #[test]
    fn eq11_points() {
        assert_eq!(rescale(0.0), 50.0);
        assert_eq!(rescale(3.0), 100.0);
        assert_eq!(rescale(-3.0), 0.0);
    }

    #[test]
    fn unanimous_subjects_are_not_flagged() {
        let subjects = [1u32, 2, 3, 4];
        let videos: Vec<String> = (0..6).map(|j| format!("v{j}")).collect();
        let z = ZMatrix {
            subjects: subjects.to_vec(),
            videos: videos.clone(),
            z: vec![(0..6).map(|j| Some(j as f64 - 2.5)).collect(); 4],
            sessions: vec![],
        };
        let r = subject_rejection(&z);
        assert!(r.rejected.is_empty());
        assert!(r.subjects.iter().all(|s| s.p == 0 && s.q == 0));
        assert!(r.videos.iter().all(|v| v.skipped));
        let s = rescale_to_dmos(&z, &[]);
        assert_eq!(s.videos[0].value, rescale(-2.5));
    }

    #[test]
    fn opinion_csv_round_trip() {
        let s = OpinionScores {
            kind: ScoreKind::Dmos,
            videos: vec![VideoScore { stimulus_id: "v1".into(), value: 51.25, std: 3.5, n_subjects: 30 }],
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("stimulus_id,dmos,dmos_std,n_subjects\n"));
        assert_eq!(OpinionScores::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn bad_vote_csv_reports_line() {
        let text = "participant,session,stimulus_id,content,is_reference,raw_score,timestamp\n\
                    1,1,a,A,true,30,0\n\
                    1,1,b,A,false,abc,0\n";
        match ScoreMatrix::from_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
