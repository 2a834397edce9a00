//! Study state on disk: playlists, vote capture with write-ahead
//! persistence, session progress, and raw score export.
//!
//! Layout of a study directory:
//!
//! ```text
//! manifest.json   stimulus manifest
//! design.json     groups and every participant-session playlist
//! training.json   optional fixed training playlist items
//! votes.jsonl     append-only vote log, one JSON record per line
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::design::{Playlist, PlaylistItem, StudyDesign, SESSION_COUNT};
use crate::error::{Error, Result};
use crate::manifest::Manifest;

pub const MAX_SCORE: i64 = 39;
const DAY_MS: u64 = 24 * 3600 * 1000;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DESIGN_FILE: &str = "design.json";
pub const TRAINING_FILE: &str = "training.json";
pub const VOTES_FILE: &str = "votes.jsonl";

/// A vote as submitted by a client. The server stamps time and position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRequest {
    pub participant: u32,
    pub session: u8,
    pub stimulus_id: String,
    pub raw_score: i64,
    #[serde(default)]
    pub position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub participant: u32,
    pub session: u8,
    pub stimulus_id: String,
    pub raw_score: u8,
    /// unix milliseconds
    pub timestamp: u64,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub position: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub participant: u32,
    pub session: u8,
    pub voted: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Enforce the minimum spacing between a participant's sessions.
    pub gating: bool,
    pub min_session_gap_ms: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            gating: true,
            min_session_gap_ms: DAY_MS,
        }
    }
}

#[derive(Debug, Default)]
struct SessionState {
    voted: HashSet<String>,
    next: usize,
    last_vote_ms: u64,
}

struct State {
    log: File,
    sessions: HashMap<(u32, u8), SessionState>,
    votes: Vec<VoteRecord>,
}

pub struct Study {
    dir: PathBuf,
    config: StudyConfig,
    manifest: Manifest,
    playlists: HashMap<(u32, u8), Playlist>,
    training: Vec<PlaylistItem>,
    state: Mutex<State>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

impl Study {
    /// Writes a new study directory. Fails if a vote log already exists.
    pub fn create(
        dir: &Path,
        manifest: &Manifest,
        design: &StudyDesign,
        training: &[PlaylistItem],
    ) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let votes = dir.join(VOTES_FILE);
        if votes.exists() {
            return Err(Error::Conflict(format!(
                "{} already holds votes",
                dir.display()
            )));
        }
        manifest.save(&dir.join(MANIFEST_FILE))?;
        let path = dir.join(DESIGN_FILE);
        fs::write(&path, serde_json::to_string_pretty(design)?).map_err(|e| Error::io(&path, e))?;
        let path = dir.join(TRAINING_FILE);
        fs::write(&path, serde_json::to_string_pretty(training)?).map_err(|e| Error::io(&path, e))?;
        File::create(&votes).map_err(|e| Error::io(&votes, e))?;
        Ok(())
    }

    /// Opens a study and replays its vote log.
    pub fn open(dir: &Path, config: StudyConfig) -> Result<Self> {
        let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
        let design: StudyDesign = read_json(&dir.join(DESIGN_FILE))?;
        let training_path = dir.join(TRAINING_FILE);
        let training = if training_path.exists() {
            read_json(&training_path)?
        } else {
            Vec::new()
        };
        let playlists: HashMap<(u32, u8), Playlist> = design
            .playlists
            .into_iter()
            .map(|p| ((p.participant, p.session), p))
            .collect();

        let log_path = dir.join(VOTES_FILE);
        let mut votes = Vec::new();
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path).map_err(|e| Error::io(&log_path, e))?);
            let lines: Vec<String> = reader
                .lines()
                .collect::<std::io::Result<_>>()
                .map_err(|e| Error::io(&log_path, e))?;
            let last = lines.len();
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<VoteRecord>(line) {
                    Ok(v) => votes.push(v),
                    // A torn final line was never acknowledged.
                    Err(_) if i + 1 == last => {}
                    Err(e) => {
                        return Err(Error::Parse {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let mut sessions: HashMap<(u32, u8), SessionState> = HashMap::new();
        for v in &votes {
            let s = sessions.entry((v.participant, v.session)).or_default();
            s.voted.insert(v.stimulus_id.clone());
            s.next = s.next.max(v.position + 1);
            s.last_vote_ms = s.last_vote_ms.max(v.timestamp);
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;
        // Drop any torn tail so the next append starts on a fresh line.
        let clean: String = votes
            .iter()
            .map(|v| serde_json::to_string(v).map(|s| s + "\n"))
            .collect::<std::result::Result<_, _>>()?;
        if fs::metadata(&log_path).map_err(|e| Error::io(&log_path, e))?.len() != clean.len() as u64 {
            fs::write(&log_path, clean).map_err(|e| Error::io(&log_path, e))?;
        }

        Ok(Study {
            dir: dir.to_path_buf(),
            config,
            manifest,
            playlists,
            training,
            state: Mutex::new(State {
                log,
                sessions,
                votes,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn training(&self) -> &[PlaylistItem] {
        &self.training
    }

    fn playlist_ref(&self, participant: u32, session: u8) -> Result<&Playlist> {
        if session == 0 || session as usize > SESSION_COUNT {
            return Err(Error::NotFound(format!("session {session}")));
        }
        if !self.playlists.keys().any(|(p, _)| *p == participant) {
            return Err(Error::NotFound(format!("participant {participant}")));
        }
        self.playlists
            .get(&(participant, session))
            .ok_or_else(|| Error::NotFound(format!("participant {participant} session {session}")))
    }

    fn check_gating(&self, state: &State, participant: u32, session: u8, now_ms: u64) -> Result<()> {
        if session == 1 {
            return Ok(());
        }
        let prev = session - 1;
        let total = self.playlist_ref(participant, prev)?.items.len();
        let st = state.sessions.get(&(participant, prev));
        let done = st.map_or(0, |s| s.voted.len());
        if done < total {
            return Err(Error::Precondition(format!(
                "session {prev} incomplete ({done}/{total} votes)"
            )));
        }
        if self.config.gating {
            let last = st.map_or(0, |s| s.last_vote_ms);
            let ready = last + self.config.min_session_gap_ms;
            if now_ms < ready {
                return Err(Error::Precondition(format!(
                    "session {session} opens {} minutes after session {prev} ended",
                    (ready - now_ms).div_ceil(60_000)
                )));
            }
        }
        Ok(())
    }

    /// Subject-facing playlist for one session.
    pub fn playlist(&self, participant: u32, session: u8, now_ms: u64) -> Result<Playlist> {
        let pl = self.playlist_ref(participant, session)?;
        let state = self.state.lock().expect("study state poisoned");
        self.check_gating(&state, participant, session, now_ms)?;
        Ok(pl.clone())
    }

    pub fn progress(&self, participant: u32, session: u8) -> Result<Progress> {
        let pl = self.playlist_ref(participant, session)?;
        let state = self.state.lock().expect("study state poisoned");
        Ok(Progress {
            participant,
            session,
            voted: state
                .sessions
                .get(&(participant, session))
                .map_or(0, |s| s.voted.len()),
            total: pl.items.len(),
        })
    }

    /// Validates, persists (fsync) and then acknowledges one vote.
    pub fn post_vote(&self, req: &VoteRequest, now_ms: u64) -> Result<Ack> {
        if !(0..=MAX_SCORE).contains(&req.raw_score) {
            return Err(Error::Validation(format!(
                "raw_score {} outside [0, {MAX_SCORE}]",
                req.raw_score
            )));
        }
        let pl = self.playlist_ref(req.participant, req.session)?;
        let mut state = self.state.lock().expect("study state poisoned");
        let key = (req.participant, req.session);
        if state
            .sessions
            .get(&key)
            .is_some_and(|s| s.voted.contains(&req.stimulus_id))
        {
            return Err(Error::Conflict(format!(
                "stimulus {} already scored in session {}",
                req.stimulus_id, req.session
            )));
        }
        self.check_gating(&state, req.participant, req.session, now_ms)?;
        let position = state.sessions.get(&key).map_or(0, |s| s.next);
        let expected = pl.items.get(position).ok_or_else(|| {
            Error::Conflict(format!("session {} already complete", req.session))
        })?;
        if expected.stimulus_id != req.stimulus_id || req.position.is_some_and(|p| p != position) {
            return Err(Error::Sequence {
                expected: expected.stimulus_id.clone(),
                got: req.stimulus_id.clone(),
                position,
            });
        }

        let record = VoteRecord {
            participant: req.participant,
            session: req.session,
            stimulus_id: req.stimulus_id.clone(),
            raw_score: req.raw_score as u8,
            timestamp: now_ms,
            position,
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        let log_path = self.dir.join(VOTES_FILE);
        state
            .log
            .write_all(line.as_bytes())
            .and_then(|_| state.log.sync_data())
            .map_err(|e| Error::io(&log_path, e))?;

        let s = state.sessions.entry(key).or_default();
        s.voted.insert(record.stimulus_id.clone());
        s.next = position + 1;
        s.last_vote_ms = now_ms;
        state.votes.push(record);
        Ok(Ack {
            position,
            remaining: pl.items.len() - position - 1,
        })
    }

    pub fn votes(&self) -> Vec<VoteRecord> {
        self.state.lock().expect("study state poisoned").votes.clone()
    }

    /// Whether every playlist has been fully scored.
    pub fn is_complete(&self) -> bool {
        let state = self.state.lock().expect("study state poisoned");
        self.playlists.iter().all(|(k, pl)| {
            state.sessions.get(k).map_or(0, |s| s.voted.len()) == pl.items.len()
        })
    }

    /// Raw score export; see [`export_votes`].
    pub fn export<W: Write>(&self, out: W) -> Result<ExportSummary> {
        let votes = self.votes();
        let mut summary = export_votes(&self.manifest, &votes, out)?;
        summary.complete = self.is_complete();
        Ok(summary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExportSummary {
    pub rows: usize,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub participant: u32,
    pub session: u8,
    pub stimulus_id: String,
    pub content: String,
    pub is_reference: bool,
    pub raw_score: u8,
    pub timestamp: u64,
}

/// Writes one CSV row per vote, in log order. `complete` in the returned
/// summary is left false; [`Study::export`] fills it in.
pub fn export_votes<W: Write>(manifest: &Manifest, votes: &[VoteRecord], out: W) -> Result<ExportSummary> {
    let index = manifest.index();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "participant",
        "session",
        "stimulus_id",
        "content",
        "is_reference",
        "raw_score",
        "timestamp",
    ])?;
    for v in votes {
        let entry = index
            .get(v.stimulus_id.as_str())
            .ok_or_else(|| Error::NotFound(format!("stimulus {} in manifest", v.stimulus_id)))?;
        w.serialize(ExportRow {
            participant: v.participant,
            session: v.session,
            stimulus_id: v.stimulus_id.clone(),
            content: entry.content.clone(),
            is_reference: entry.is_reference,
            raw_score: v.raw_score,
            timestamp: v.timestamp,
        })?;
    }
    w.flush().map_err(|e| Error::io("<export>", e))?;
    Ok(ExportSummary {
        rows: votes.len(),
        complete: false,
    })
}
