//! Session playlist construction: initial randomization, partition into
//! video groups, round-robin assignment of groups to sessions, and the final
//! constrained shuffle with hidden references.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::Manifest;

pub const GROUP_COUNT: usize = 30;
pub const SESSION_COUNT: usize = 3;
pub const GROUPS_PER_SESSION: usize = GROUP_COUNT / SESSION_COUNT;
/// A run of this many consecutive same-content items is not allowed.
pub const MAX_RUN: usize = 10;
/// Same-content items must be at least this many positions apart.
pub const MIN_GAP: usize = 4;
pub const MAX_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StimulusRef {
    pub id: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoGroup {
    pub index: usize,
    pub members: Vec<StimulusRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionAssignment {
    pub participant: u32,
    /// 1-based session index.
    pub session: u8,
    pub groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaylistItem {
    pub stimulus_id: String,
    pub media_path: String,
}

/// Subject-facing playlist. It carries no reference flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Playlist {
    pub participant: u32,
    pub session: u8,
    pub seed: u64,
    pub items: Vec<PlaylistItem>,
}

/// Length of the longest run of consecutive same-content items.
pub fn longest_run(items: &[StimulusRef]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for (i, item) in items.iter().enumerate() {
        if i > 0 && items[i - 1].content == item.content {
            run += 1;
        } else {
            run = 1;
        }
        best = best.max(run);
    }
    best
}

/// Smallest positional distance between two items of the same content
/// (`None` if every content appears once).
pub fn min_same_content_gap<'a>(contents: impl IntoIterator<Item = &'a str>) -> Option<usize> {
    let mut last: HashMap<&str, usize> = HashMap::new();
    let mut best: Option<usize> = None;
    for (i, c) in contents.into_iter().enumerate() {
        if let Some(prev) = last.insert(c, i) {
            let gap = i - prev;
            best = Some(best.map_or(gap, |b| b.min(gap)));
        }
    }
    best
}

fn content_counts(items: &[StimulusRef]) -> Vec<(String, usize)> {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for it in items {
        match counts.iter_mut().find(|(c, _)| *c == it.content) {
            Some((_, n)) => *n += 1,
            None => counts.push((it.content.clone(), 1)),
        }
    }
    counts
}

/// Shuffles the distorted stimuli until no content forms a run of
/// `MAX_RUN` or more, then slices the list into `GROUP_COUNT` contiguous
/// groups whose sizes differ by at most one. Large and small groups are
/// interleaved so any `GROUPS_PER_SESSION` cyclically consecutive groups hold
/// either `floor` or `ceil` of a third of the stimuli.
pub fn partition_groups(stimuli: &[StimulusRef], seed: u64) -> Result<Vec<VideoGroup>> {
    let n = stimuli.len();
    if n < GROUP_COUNT {
        return Err(Error::InvalidArgument(format!(
            "{n} stimuli cannot fill {GROUP_COUNT} groups"
        )));
    }
    let counts = content_counts(stimuli);
    let (top_content, top) = counts.iter().max_by_key(|(_, c)| *c).cloned().unwrap();
    // Runs of at most MAX_RUN - 1 separated by at least one other item.
    if top > (MAX_RUN - 1) * (n - top + 1) {
        return Err(Error::DesignInfeasible(format!(
            "content {top_content} has {top} of {n} stimuli; a run of {MAX_RUN} is unavoidable"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut list = stimuli.to_vec();
    let mut accepted = false;
    for _ in 0..MAX_RETRIES {
        list.shuffle(&mut rng);
        if longest_run(&list) < MAX_RUN {
            accepted = true;
            break;
        }
    }
    if !accepted {
        return Err(Error::DesignInfeasible(format!(
            "no shuffle without a run of {MAX_RUN} after {MAX_RETRIES} attempts"
        )));
    }

    let mut groups = Vec::with_capacity(GROUP_COUNT);
    let mut it = list.into_iter();
    for index in 0..GROUP_COUNT {
        let size = (index + 1) * n / GROUP_COUNT - index * n / GROUP_COUNT;
        groups.push(VideoGroup {
            index,
            members: it.by_ref().take(size).collect(),
        });
    }
    Ok(groups)
}

/// Groups shown to participant `p` (1-based) in each of the three sessions:
/// session `k` gets groups `(p - 1) + 10 (k - 1) + j  (mod 30)` for
/// `j = 0..10`.
pub fn round_robin_assign(participant: u32) -> [SessionAssignment; SESSION_COUNT] {
    assert!(participant >= 1, "participants are numbered from 1");
    let offset = (participant as usize - 1) % GROUP_COUNT;
    std::array::from_fn(|k| SessionAssignment {
        participant,
        session: k as u8 + 1,
        groups: (0..GROUPS_PER_SESSION)
            .map(|j| (offset + GROUPS_PER_SESSION * k + j) % GROUP_COUNT)
            .collect(),
    })
}

/// One randomized sequential fill. Returns the order, or the content left
/// stranded when no eligible item remained.
fn try_fill(items: &[StimulusRef], rng: &mut ChaCha8Rng) -> std::result::Result<Vec<StimulusRef>, String> {
    let mut remaining: Vec<StimulusRef> = items.to_vec();
    remaining.shuffle(rng);
    let mut out: Vec<StimulusRef> = Vec::with_capacity(items.len());
    while !remaining.is_empty() {
        let recent: Vec<&str> = out
            .iter()
            .rev()
            .take(MIN_GAP - 1)
            .map(|s| s.content.as_str())
            .collect();
        let slots = remaining.len();
        // A content with c items left needs (c - 1) * MIN_GAP + 1 slots; if it
        // is at that limit it must be placed now.
        let forced = content_counts(&remaining)
            .into_iter()
            .find(|(_, c)| (c - 1) * MIN_GAP + 1 >= slots && *c > 1)
            .map(|(content, _)| content);
        let eligible: Vec<usize> = remaining
            .iter()
            .enumerate()
            .filter(|(_, s)| !recent.contains(&s.content.as_str()))
            .filter(|(_, s)| forced.as_ref().is_none_or(|f| *f == s.content))
            .map(|(i, _)| i)
            .collect();
        if eligible.is_empty() {
            return Err(forced.unwrap_or_else(|| remaining[0].content.clone()));
        }
        let pick = eligible[rng.random_range(0..eligible.len())];
        out.push(remaining.swap_remove(pick));
    }
    Ok(out)
}

/// Shuffles `items` so that any two same-content items are at least
/// `MIN_GAP` positions apart, using randomized sequential placement with
/// bounded restarts.
pub fn constrained_shuffle(items: &[StimulusRef], seed: u64) -> Result<Vec<StimulusRef>> {
    let n = items.len();
    for (content, c) in content_counts(items) {
        if (c - 1) * MIN_GAP + 1 > n {
            return Err(Error::DesignInfeasible(format!(
                "content {content} has {c} items; {n} positions cannot keep them {MIN_GAP} apart"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocking: HashMap<String, usize> = HashMap::new();
    for _ in 0..MAX_RETRIES {
        match try_fill(items, &mut rng) {
            Ok(order) => return Ok(order),
            Err(content) => *blocking.entry(content).or_default() += 1,
        }
    }
    let worst = blocking
        .into_iter()
        .max_by_key(|(_, n)| *n)
        .map(|(c, _)| c)
        .unwrap_or_default();
    Err(Error::DesignInfeasible(format!(
        "no ordering keeps content {worst} {MIN_GAP} positions apart after {MAX_RETRIES} attempts"
    )))
}

/// Merges the assigned groups with the hidden references and shuffles them
/// under the spacing constraint. `media` maps stimulus id to media path.
pub fn assemble_session_playlist(
    assignment: &SessionAssignment,
    groups: &[VideoGroup],
    references: &[StimulusRef],
    media: &HashMap<String, String>,
    seed: u64,
) -> Result<Playlist> {
    let mut items: Vec<StimulusRef> = Vec::new();
    for &g in &assignment.groups {
        let group = groups
            .iter()
            .find(|x| x.index == g)
            .ok_or_else(|| Error::NotFound(format!("video group {g}")))?;
        items.extend(group.members.iter().cloned());
    }
    items.extend(references.iter().cloned());
    let order = constrained_shuffle(&items, seed)?;
    Ok(Playlist {
        participant: assignment.participant,
        session: assignment.session,
        seed,
        items: order
            .into_iter()
            .map(|s| PlaylistItem {
                media_path: media.get(&s.id).cloned().unwrap_or_default(),
                stimulus_id: s.id,
            })
            .collect(),
    })
}

/// Per-session seed derived from the study seed.
pub fn session_seed(study_seed: u64, participant: u32, session: u8) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(study_seed);
    rng.set_stream(((participant as u64) << 8) | session as u64);
    rng.random()
}

/// Groups and all playlists for a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub seed: u64,
    pub groups: Vec<VideoGroup>,
    pub playlists: Vec<Playlist>,
}

pub fn design_study(manifest: &Manifest, participants: u32, seed: u64) -> Result<StudyDesign> {
    let distorted: Vec<StimulusRef> = manifest
        .distorted()
        .map(|e| StimulusRef {
            id: e.stimulus_id.clone(),
            content: e.content.clone(),
        })
        .collect();
    let references: Vec<StimulusRef> = manifest
        .entries
        .iter()
        .filter(|e| e.is_reference)
        .map(|e| StimulusRef {
            id: e.stimulus_id.clone(),
            content: e.content.clone(),
        })
        .collect();
    let media: HashMap<String, String> = manifest
        .entries
        .iter()
        .map(|e| (e.stimulus_id.clone(), e.media_path.clone()))
        .collect();
    let groups = partition_groups(&distorted, seed)?;
    let mut playlists = Vec::new();
    for p in 1..=participants {
        for assignment in round_robin_assign(p) {
            let s = session_seed(seed, p, assignment.session);
            playlists.push(assemble_session_playlist(&assignment, &groups, &references, &media, s)?);
        }
    }
    Ok(StudyDesign {
        seed,
        groups,
        playlists,
    })
}
