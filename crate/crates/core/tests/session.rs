use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use proptest::prelude::*;
use stvq_core::design::StudyDesign;
use stvq_core::scores::{compute_dmos, ScoreMatrix};
use stvq_core::session::{Study, StudyConfig, VoteRequest, VOTES_FILE};
use stvq_core::synth::{full_playlists, score_study, SubjectPanel};
use stvq_core::Error;

const PARTICIPANTS: u32 = 4;

fn open(dir: &Path) -> Study {
    Study::open(
        dir,
        StudyConfig {
            gating: false,
            ..StudyConfig::default()
        },
    )
    .unwrap()
}

/// A small single-session study plus simulated votes for every playlist.
fn setup(dir: &Path, seed: u64) -> (Study, ScoreMatrix) {
    let (m, q) = score_study(3, 18, seed);
    let design = StudyDesign {
        seed,
        groups: Vec::new(),
        playlists: full_playlists(&m, PARTICIPANTS),
    };
    Study::create(dir, &m, &design, &[]).unwrap();
    let votes = SubjectPanel::generate(PARTICIPANTS as usize, 0, 3.0, seed)
        .simulate(&design.playlists, &m, &q, seed + 1)
        .unwrap();
    (open(dir), votes)
}

fn post_all(study: &Study, votes: &ScoreMatrix) {
    for (t, v) in votes.scores.iter().enumerate() {
        study
            .post_vote(
                &VoteRequest {
                    participant: v.subject,
                    session: v.session,
                    stimulus_id: v.stimulus_id.clone(),
                    raw_score: v.score as i64,
                    position: None,
                },
                1_000 + t as u64,
            )
            .unwrap();
    }
}

#[test]
fn export_reproduces_dmos() {
    let dir = tempfile::tempdir().unwrap();
    let (study, votes) = setup(dir.path(), 1);
    post_all(&study, &votes);
    let mut csv = Vec::new();
    let summary = study.export(&mut csv).unwrap();
    assert!(summary.complete);
    assert_eq!(summary.rows, votes.scores.len());
    let imported = ScoreMatrix::from_csv(csv.as_slice()).unwrap();
    assert_eq!(compute_dmos(&imported).unwrap(), compute_dmos(&votes).unwrap());
}

#[test]
fn partial_export_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let (study, votes) = setup(dir.path(), 2);
    let half = ScoreMatrix::new(votes.scores[..10].to_vec()).unwrap();
    post_all(&study, &half);
    let summary = study.export(std::io::sink()).unwrap();
    assert_eq!((summary.rows, summary.complete), (10, false));
}

#[test]
fn restart_keeps_acknowledged_votes_and_drops_torn_tail() {
    let dir = tempfile::tempdir().unwrap();
    let (study, votes) = setup(dir.path(), 3);
    let head = ScoreMatrix::new(votes.scores[..7].to_vec()).unwrap();
    post_all(&study, &head);
    let before = study.votes();
    drop(study);

    let mut log = OpenOptions::new().append(true).open(dir.path().join(VOTES_FILE)).unwrap();
    log.write_all(b"{\"participant\":1,\"sess").unwrap();
    drop(log);

    let study = open(dir.path());
    assert_eq!(study.votes(), before);
    let p = study.progress(1, 1).unwrap();
    assert_eq!(p.voted, 7);
    // the next vote continues the sequence
    let next = &votes.scores[7];
    let ack = study
        .post_vote(
            &VoteRequest {
                participant: 1,
                session: 1,
                stimulus_id: next.stimulus_id.clone(),
                raw_score: 20,
                position: Some(7),
            },
            99,
        )
        .unwrap();
    assert_eq!(ack.position, 7);
    drop(study);
    assert_eq!(open(dir.path()).votes().len(), 8);
}

#[test]
fn one_vote_per_item() {
    let dir = tempfile::tempdir().unwrap();
    let (study, votes) = setup(dir.path(), 4);
    let first = &votes.scores[0];
    let req = VoteRequest {
        participant: first.subject,
        session: 1,
        stimulus_id: first.stimulus_id.clone(),
        raw_score: 10,
        position: None,
    };
    study.post_vote(&req, 1).unwrap();
    assert!(matches!(study.post_vote(&req, 2), Err(Error::Conflict(_))));
    let skip = VoteRequest {
        stimulus_id: votes.scores[2].stimulus_id.clone(),
        ..req.clone()
    };
    assert!(matches!(study.post_vote(&skip, 3), Err(Error::Sequence { position: 1, .. })));
    assert!(matches!(
        study.post_vote(&VoteRequest { participant: 99, ..req }, 4),
        Err(Error::NotFound(_))
    ));
    assert_eq!(study.votes().len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn raw_score_range_enforced(score in -100i64..100) {
        let dir = tempfile::tempdir().unwrap();
        let (study, votes) = setup(dir.path(), 5);
        let first = &votes.scores[0];
        let r = study.post_vote(
            &VoteRequest {
                participant: first.subject,
                session: 1,
                stimulus_id: first.stimulus_id.clone(),
                raw_score: score,
                position: None,
            },
            1,
        );
        if (0..=39).contains(&score) {
            prop_assert!(r.is_ok());
            prop_assert_eq!(study.votes()[0].raw_score as i64, score);
        } else {
            prop_assert!(matches!(r, Err(Error::Validation(_))));
            prop_assert!(study.votes().is_empty());
        }
    }
}
