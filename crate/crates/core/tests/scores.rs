use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use stvq_core::design::design_study;
use stvq_core::scores::{
    compute_dmos, compute_mos, difference_scores, session_zscores, split_half_srcc, subject_rejection, RawScore,
    ScoreMatrix, ZMatrix,
};
use stvq_core::stats::{mean, sample_std, spearman};
use stvq_core::synth::{full_playlists, score_study, SubjectPanel};

/// Noise-free votes `gain * q + offset`, unrounded, one session holding
/// everything.
fn exact_scores(contents: usize, distorted: usize, subjects: u32, seed: u64) -> ScoreMatrix {
    let (m, q) = score_study(contents, distorted, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let gain = rand_distr::Uniform::new(0.5, 1.5).unwrap();
    let mut scores = Vec::new();
    for subject in 1..=subjects {
        let (a, b) = (gain.sample(&mut rng), gain.sample(&mut rng));
        for e in &m.entries {
            scores.push(RawScore {
                subject,
                session: 1,
                stimulus_id: e.stimulus_id.clone(),
                content: e.content.clone(),
                is_reference: e.is_reference,
                score: a * q[&e.stimulus_id] + b,
            });
        }
    }
    ScoreMatrix::new(scores).unwrap()
}

fn simulated(contents: usize, distorted: usize, subjects: u32, sigma: f64, seed: u64) -> ScoreMatrix {
    let (m, q) = score_study(contents, distorted, seed);
    let panel = SubjectPanel::generate(subjects as usize, 0, sigma, seed + 1);
    panel.simulate(&full_playlists(&m, subjects), &m, &q, seed + 2).unwrap()
}

fn z_close(a: &ZMatrix, b: &ZMatrix, tol: f64) -> bool {
    a.subjects == b.subjects
        && a.videos == b.videos
        && a.z.iter().flatten().zip(b.z.iter().flatten()).all(|(x, y)| match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() <= tol,
            (None, None) => true,
            _ => false,
        })
}

fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / xs.len() as f64;
    let m4 = xs.iter().map(|v| (v - m).powi(4)).sum::<f64>() / xs.len() as f64;
    m4 / (m2 * m2)
}

/// Fraction of standard-normal columns of `n` draws whose screening
/// kurtosis lies in [2, 4].
fn normal_gate_rate(n: usize, columns: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z = ZMatrix {
        subjects: (1..=n as u32).collect(),
        videos: (0..columns).map(|j| format!("v{j}")).collect(),
        z: (0..n)
            .map(|_| (0..columns).map(|_| Some(normal.sample(&mut rng))).collect())
            .collect(),
        sessions: Vec::new(),
    };
    let report = subject_rejection(&z);
    for (j, v) in report.videos.iter().enumerate() {
        let col: Vec<f64> = z.z.iter().map(|row| row[j].unwrap()).collect();
        assert!((v.kurtosis - kurtosis(&col)).abs() < 1e-9);
    }
    report.videos.iter().filter(|v| (2.0..=4.0).contains(&v.kurtosis)).count() as f64 / columns as f64
}

#[test]
fn normal_kurtosis_gate() {
    // large samples sit inside the gate almost always
    assert!(normal_gate_rate(500, 2000, 1) >= 0.99);
    // a 34-subject panel only does so about nine times in ten
    let small = normal_gate_rate(34, 20_000, 2);
    assert!((0.88..=0.92).contains(&small), "{small}");
}

#[test]
fn mos_order_inverts_dmos_order() {
    let m = exact_scores(6, 60, 8, 4);
    let dmos = compute_dmos(&m).unwrap().scores;
    let mos = compute_mos(&m).scores;
    let (mut d, mut s) = (Vec::new(), Vec::new());
    for v in &dmos.videos {
        d.push(v.value);
        s.push(mos.get(&v.stimulus_id).unwrap());
    }
    assert_eq!(d.len(), 60);
    assert_eq!(spearman(&d, &s).unwrap(), -1.0);
}

#[test]
fn noise_free_split_half_is_one() {
    let m = exact_scores(6, 60, 10, 5);
    let p = compute_dmos(&m).unwrap();
    assert!(p.report.rejected.is_empty());
    let sh = split_half_srcc(&p.z, &p.report.rejected, 50, 6).unwrap();
    assert!((sh.median - 1.0).abs() <= 1e-12, "{}", sh.median);
    assert!((sh.min - 1.0).abs() <= 1e-12);
}

#[test]
fn dmos_centres_on_fifty() {
    let (m, q) = score_study(15, 437, 7);
    let design = design_study(&m, 30, 8).unwrap();
    let panel = SubjectPanel::generate(30, 0, 3.0, 9);
    let scores = panel.simulate(&design.playlists, &m, &q, 10).unwrap();
    let p = compute_dmos(&scores).unwrap();
    let avg = mean(&p.scores.videos.iter().map(|v| v.value).collect::<Vec<_>>());
    assert!((avg - 50.0).abs() <= 0.5, "{avg}");
    assert_eq!(compute_dmos(&scores).unwrap(), p);
}

#[test]
fn rejection_counts_only_eligible_videos() {
    // one column with zero spread is skipped for everyone
    let z = ZMatrix {
        subjects: vec![1, 2, 3],
        videos: vec!["a".into(), "b".into()],
        z: vec![vec![Some(0.5), Some(1.0)], vec![Some(0.5), Some(-1.0)], vec![Some(0.5), None]],
        sessions: Vec::new(),
    };
    let r = subject_rejection(&z);
    assert!(r.videos[0].skipped);
    let n: Vec<usize> = r.subjects.iter().map(|s| s.n_videos).collect();
    assert_eq!(n, vec![1, 1, 0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn z_ignores_affine_rescoring(
        seed in 0u64..1000,
        affine in prop::collection::vec((0.1f64..10.0, -50.0f64..50.0), 6),
    ) {
        let m = simulated(3, 24, 6, 3.0, seed);
        let mut moved = m.clone();
        for s in &mut moved.scores {
            let (a, b) = affine[s.subject as usize - 1];
            s.score = a * s.score + b;
        }
        let z0 = session_zscores(&difference_scores(&m).unwrap());
        let z1 = session_zscores(&difference_scores(&moved).unwrap());
        prop_assert!(z_close(&z0, &z1, 1e-9));
    }

    #[test]
    fn z_rows_are_standardized(seed in 0u64..1000) {
        let m = simulated(4, 40, 5, 4.0, seed);
        let z = session_zscores(&difference_scores(&m).unwrap());
        for (i, row) in z.z.iter().enumerate() {
            let vals: Vec<f64> = row.iter().flatten().copied().collect();
            if z.sessions[i].degenerate {
                prop_assert!(vals.is_empty());
                continue;
            }
            prop_assert!(mean(&vals).abs() < 1e-12);
            prop_assert!((sample_std(&vals) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn negating_z_swaps_flag_sides(seed in any::<u64>(), subjects in 6usize..20, videos in 10usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = StudentT::new(3.0).unwrap();
        let z = ZMatrix {
            subjects: (1..=subjects as u32).collect(),
            videos: (0..videos).map(|j| format!("v{j}")).collect(),
            z: (0..subjects).map(|_| (0..videos).map(|_| Some(t.sample(&mut rng))).collect()).collect(),
            sessions: Vec::new(),
        };
        let mut neg = z.clone();
        neg.z.iter_mut().flatten().for_each(|v| *v = v.map(|x| -x));
        let (a, b) = (subject_rejection(&z), subject_rejection(&neg));
        for (x, y) in a.subjects.iter().zip(&b.subjects) {
            prop_assert_eq!((x.p, x.q, x.n_videos), (y.q, y.p, y.n_videos));
        }
        prop_assert_eq!(a.rejected, b.rejected);
    }

    #[test]
    fn dmos_is_deterministic_and_order_free(seed in 0u64..1000) {
        let m = simulated(3, 24, 5, 3.0, seed);
        let mut shuffled = m.clone();
        shuffled.scores.reverse();
        let (a, b) = (compute_dmos(&m).unwrap(), compute_dmos(&shuffled).unwrap());
        let a: HashMap<_, _> = a.scores.videos.iter().map(|v| (v.stimulus_id.clone(), v.value)).collect();
        for v in &b.scores.videos {
            prop_assert!((a[&v.stimulus_id] - v.value).abs() < 1e-9);
        }
    }
}
